"""Path representation, arc-length resampling, curvature and slicing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DegeneratePath, SchemaError

_COINCIDENT = 1e-9


def wrap_angle(theta):
    """Wrap an angle (or array of angles) into (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), 2.0 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_tuple(self):
        return (self.x, self.y, self.theta)


@dataclass(frozen=True, eq=False)
class Polyline:
    """Raw ordered (x, y) points, as ingested before resampling."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if len(pts) < 2:
            raise DegeneratePath("a polyline needs at least 2 points")
        seg = np.hypot(*np.diff(pts, axis=0).T)
        if np.any(seg <= _COINCIDENT):
            raise DegeneratePath("polyline has coincident consecutive points")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_points(cls, points) -> "Polyline":
        """Build a polyline, silently dropping repeated consecutive points."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            raise DegeneratePath("empty point list")
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.hypot(*np.diff(pts, axis=0).T) > _COINCIDENT
        return cls(pts[keep])

    @property
    def length(self) -> float:
        return float(np.hypot(*np.diff(self.points, axis=0).T).sum())


def _segment_headings(points: np.ndarray) -> np.ndarray:
    if len(points) < 2:
        return np.zeros(len(points))
    d = np.diff(points, axis=0)
    h = np.arctan2(d[:, 1], d[:, 0])
    return np.append(h, h[-1])


@dataclass(frozen=True, eq=False)
class SampledPath:
    """Points spaced ``delta`` apart in arc length.

    ``headings[i]`` is the direction of segment ``i``; the last heading is a
    copy of the one before it.
    """

    points: np.ndarray
    delta: float
    headings: np.ndarray = None

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "points", pts)
        if self.headings is None:
            object.__setattr__(self, "headings", _segment_headings(pts))
        else:
            object.__setattr__(self, "headings", np.asarray(self.headings, dtype=float))

    def __len__(self):
        return len(self.points)

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def arc_length(self) -> float:
        return float(np.hypot(*np.diff(self.points, axis=0).T).sum())

    def transformed(self, x: float, y: float, theta: float) -> "SampledPath":
        """Rotate by ``theta`` about the origin, then translate by (x, y)."""
        c, s = math.cos(theta), math.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        pts = self.points @ rot.T + np.array([x, y])
        return SampledPath(pts, self.delta, wrap_angle(self.headings + theta))

    def truncated(self, n_points: int) -> "SampledPath":
        return SampledPath(self.points[:n_points], self.delta, self.headings[:n_points])

    def equals(self, other: "SampledPath", atol: float = 0.0) -> bool:
        return (
            self.points.shape == other.points.shape
            and np.allclose(self.points, other.points, rtol=0.0, atol=atol)
            and self.delta == other.delta
        )


def arclength_stations(total: float, delta: float) -> np.ndarray:
    """Sample stations 0, delta, 2*delta, ... ending exactly at ``total``.

    A leftover tail of at least ``delta / 2`` becomes its own final segment;
    a shorter tail is absorbed into the last full segment.
    """
    m = int(math.floor(total / delta + 1e-9))
    tail = total - m * delta
    if m == 0 or tail >= delta / 2:
        stations = np.append(np.arange(m + 1) * delta, total)
        if tail <= 1e-9 * max(1.0, total):
            stations = stations[:-1]
    else:
        stations = np.arange(m + 1) * delta
    stations[-1] = total
    return stations


def resample_by_arclength(p: Polyline | np.ndarray, delta: float) -> SampledPath:
    """Resample a polyline at arc-length steps of ``delta`` (linear interpolation).

    A leftover tail of at least ``delta / 2`` becomes one more segment ending at
    the polyline endpoint. A shorter tail is merged into the final segment, so
    the last point is still the polyline endpoint.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    pts = p.points if isinstance(p, Polyline) else Polyline.from_points(p).points
    seg = np.hypot(*np.diff(pts, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total < delta / 2:
        raise DegeneratePath(f"path length {total:.6g} is below delta/2")

    stations = arclength_stations(total, delta)
    x = np.interp(stations, cum, pts[:, 0])
    y = np.interp(stations, cum, pts[:, 1])
    out = np.column_stack([x, y])
    out[0] = pts[0]
    out[-1] = pts[-1]
    return SampledPath(out, delta)


def menger_curvature(points: np.ndarray) -> np.ndarray:
    """Signed inverse circumradius of every consecutive triple (length N - 2)."""
    a, b, c = points[:-2], points[1:-1], points[2:]
    ab = b - a
    bc = c - b
    ac = c - a
    cross = ab[:, 0] * bc[:, 1] - ab[:, 1] * bc[:, 0]
    denom = np.hypot(*ab.T) * np.hypot(*bc.T) * np.hypot(*ac.T)
    out = np.zeros(len(cross))
    # rounding noise on collinear triples is not curvature
    ok = (denom > 0) & (np.abs(cross) > 1e-12 * np.hypot(*ab.T) * np.hypot(*bc.T))
    out[ok] = 2.0 * cross[ok] / denom[ok]
    return out


def curvature_profile(p: SampledPath) -> np.ndarray:
    """Per-point signed curvature; endpoints copy their neighbour."""
    if len(p) < 3:
        raise DegeneratePath("curvature needs at least 3 points")
    inner = menger_curvature(p.points)
    return np.concatenate([[inner[0]], inner, [inner[-1]]])


def slice_sliding_windows(p: SampledPath, window: float, step: float) -> list[SampledPath]:
    """Contiguous sub-paths of arc length ``window`` whose starts advance by ``step``.

    Trailing windows shorter than ``window`` are dropped.
    """
    if window < p.delta or step < p.delta:
        raise ValueError("window and step must be at least delta")
    w = int(round(window / p.delta))
    s = int(round(step / p.delta))
    n_seg = len(p) - 1
    out = []
    start = 0
    while start + w <= n_seg:
        sl = slice(start, start + w + 1)
        out.append(SampledPath(p.points[sl].copy(), p.delta, p.headings[sl].copy()))
        start += s
    return out


def normalize_to_origin(p: SampledPath) -> SampledPath:
    """Rigidly move ``p`` so it starts at the origin with heading 0."""
    if len(p) == 0:
        raise DegeneratePath("empty path")
    x0, y0 = p.points[0]
    th = p.headings[0]
    c, s = math.cos(-th), math.sin(-th)
    rot = np.array([[c, -s], [s, c]])
    pts = (p.points - p.points[0]) @ rot.T
    pts[0] = 0.0
    headings = wrap_angle(p.headings - th)
    headings = np.atleast_1d(headings).astype(float)
    headings[0] = 0.0
    return SampledPath(pts, p.delta, headings)


# --- dataset CSV -----------------------------------------------------------

CSV_HEADER = ["path_id", "x", "y"]


def read_paths_csv(path: str | Path) -> dict[str, Polyline]:
    """Read ``path_id,x,y`` rows, grouped by path_id in file order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("missing header path_id,x,y") from None
        if header[:3] != CSV_HEADER:
            raise SchemaError("missing header path_id,x,y")
        groups: dict[str, list[tuple[float, float]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                groups.setdefault(row[0].strip(), []).append((float(row[1]), float(row[2])))
            except (IndexError, ValueError):
                raise SchemaError(f"bad row at line {lineno}") from None
    return {pid: Polyline.from_points(pts) for pid, pts in groups.items()}


def write_paths_csv(paths: Iterable[tuple[str, SampledPath]], path: str | Path) -> None:
    """Write sampled paths with the dataset schema plus a heading column."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER + ["heading"])
        for pid, sp in paths:
            for (x, y), h in zip(sp.points, sp.headings):
                w.writerow([pid, repr(float(x)), repr(float(y)), repr(float(h))])


def read_sampled_csv(path: str | Path, delta: float) -> dict[str, SampledPath]:
    """Read paths written by :func:`write_paths_csv` without resampling."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != CSV_HEADER:
            raise SchemaError("missing header path_id,x,y")
        has_heading = len(header) > 3 and header[3].strip() == "heading"
        pts: dict[str, list] = {}
        hds: dict[str, list] = {}
        for row in reader:
            if not row:
                continue
            pts.setdefault(row[0], []).append((float(row[1]), float(row[2])))
            if has_heading:
                hds.setdefault(row[0], []).append(float(row[3]))
    return {
        pid: SampledPath(np.array(p), delta, np.array(hds[pid]) if has_heading else None)
        for pid, p in pts.items()
    }
