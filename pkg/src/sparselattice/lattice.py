"""Lattice discretization, control actions and control sets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import HeadingMismatch, SchemaError
from .geometry import Pose2D, SampledPath, wrap_angle


def default_headings() -> tuple[float, ...]:
    """The 16 headings pointing along lattice vectors (1,0), (2,1), (1,1), (1,2), ..."""
    base = [(1, 0), (2, 1), (1, 1), (1, 2)]
    vecs = []
    for q in range(4):
        for vx, vy in base:
            for _ in range(q):
                vx, vy = -vy, vx
            vecs.append((vx, vy))
    return tuple(wrap_angle(math.atan2(vy, vx)) for vx, vy in vecs)


@dataclass(frozen=True)
class LatticeConfig:
    dx: float = 0.4
    dy: float = 0.4
    headings: tuple[float, ...] = field(default_factory=default_headings)

    def __post_init__(self):
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("lattice resolution must be positive")
        hs = tuple(float(wrap_angle(h)) for h in self.headings)
        if len(set(np.round(hs, 12))) != len(hs):
            raise ValueError("lattice headings must be distinct")
        object.__setattr__(self, "headings", hs)

    @property
    def n_headings(self) -> int:
        return len(self.headings)

    def heading_index(self, theta: float) -> int:
        """Nearest heading by angular distance; ties go to the smaller index."""
        diffs = np.abs(wrap_angle(np.asarray(self.headings) - theta))
        return int(np.flatnonzero(diffs <= diffs.min() + 1e-12)[0])

    def to_dict(self) -> dict:
        return {"dx": self.dx, "dy": self.dy, "headings": list(self.headings)}

    @classmethod
    def from_dict(cls, d: dict) -> "LatticeConfig":
        return cls(float(d["dx"]), float(d["dy"]), tuple(float(h) for h in d["headings"]))


class LatticeVertex(NamedTuple):
    ix: int
    iy: int
    itheta: int


def snap_to_lattice(p: Pose2D, cfg: LatticeConfig) -> LatticeVertex:
    ix = int(math.floor(p.x / cfg.dx + 0.5))
    iy = int(math.floor(p.y / cfg.dy + 0.5))
    return LatticeVertex(ix, iy, cfg.heading_index(p.theta))


def vertex_pose(u: LatticeVertex, cfg: LatticeConfig) -> Pose2D:
    return Pose2D(u.ix * cfg.dx, u.iy * cfg.dy, cfg.headings[u.itheta])


@dataclass(frozen=True, eq=False)
class ControlAction:
    """A motion primitive applicable at any vertex with heading ``start_heading``.

    ``path`` is expressed relative to the start vertex position, already
    oriented along the start heading (no rotation is needed to place it).
    """

    start_heading: int
    delta_ix: int
    delta_iy: int
    end_heading: int
    path: SampledPath
    arc_length: float
    coeffs: tuple[float, ...] = ()

    @property
    def n_segments(self) -> int:
        return len(self.path) - 1

    @property
    def key(self) -> tuple[int, int, int, int]:
        return (self.start_heading, self.delta_ix, self.delta_iy, self.end_heading)

    @property
    def is_straight(self) -> bool:
        if self.start_heading != self.end_heading:
            return False
        turn = wrap_angle(self.path.headings - self.path.headings[0])
        return bool(np.all(np.abs(turn) < 1e-9))

    def __repr__(self):
        return (
            f"ControlAction(h={self.start_heading}->{self.end_heading}, "
            f"d=({self.delta_ix},{self.delta_iy}), s={self.arc_length:.3f}, n={self.n_segments})"
        )


def apply_control_action(u: LatticeVertex, c: ControlAction, i: int) -> tuple[LatticeVertex, int]:
    """Successor vertex and path-point index after applying ``c`` at ``(u, i)``."""
    if c.start_heading != u.itheta:
        raise HeadingMismatch(f"action starts at heading {c.start_heading}, vertex has {u.itheta}")
    v = LatticeVertex(u.ix + c.delta_ix, u.iy + c.delta_iy, c.end_heading)
    return v, i + c.n_segments


class _Packed(NamedTuple):
    start_h: np.ndarray
    dix: np.ndarray
    diy: np.ndarray
    end_h: np.ndarray
    nseg: np.ndarray
    pts: np.ndarray
    head_ptr: np.ndarray
    head_idx: np.ndarray


class ControlSet:
    """Per-heading families of control actions.

    ``all`` keeps insertion order, which is also the action index used for
    tie-breaking everywhere in the package.
    """

    def __init__(self, actions: Iterable[ControlAction], cfg: LatticeConfig, delta: float):
        self.cfg = cfg
        self.delta = float(delta)
        self.all: list[ControlAction] = []
        self._keys: dict[tuple, int] = {}
        for a in actions:
            if not 0 <= a.start_heading < cfg.n_headings:
                raise ValueError(f"bad start heading {a.start_heading}")
            if a.key in self._keys:
                continue
            self._keys[a.key] = len(self.all)
            self.all.append(a)
        self.by_heading: dict[int, list[ControlAction]] = {h: [] for h in range(cfg.n_headings)}
        for a in self.all:
            self.by_heading[a.start_heading].append(a)

    def __len__(self):
        return len(self.all)

    def __iter__(self):
        return iter(self.all)

    def __contains__(self, a: ControlAction) -> bool:
        return a.key in self._keys

    def index(self, a: ControlAction) -> int:
        return self._keys[a.key]

    def with_actions(self, extra: Iterable[ControlAction]) -> "ControlSet":
        return ControlSet([*self.all, *extra], self.cfg, self.delta)

    def subset(self, keys: Iterable[tuple]) -> "ControlSet":
        wanted = set(keys)
        return ControlSet([a for a in self.all if a.key in wanted], self.cfg, self.delta)

    def keys(self) -> list[tuple]:
        return [a.key for a in self.all]

    @cached_property
    def packed(self) -> _Packed:
        """Flat arrays consumed by the compiled search kernels."""
        n = len(self.all)
        nmax = max((a.n_segments for a in self.all), default=0)
        pts = np.full((n, nmax + 1, 2), np.nan)
        for i, a in enumerate(self.all):
            pts[i, : len(a.path)] = a.path.points
        head_ptr = np.zeros(self.cfg.n_headings + 1, dtype=np.int64)
        head_idx = []
        for h in range(self.cfg.n_headings):
            idx = [self._keys[a.key] for a in self.by_heading[h]]
            head_idx.extend(idx)
            head_ptr[h + 1] = head_ptr[h] + len(idx)
        return _Packed(
            np.array([a.start_heading for a in self.all], dtype=np.int64),
            np.array([a.delta_ix for a in self.all], dtype=np.int64),
            np.array([a.delta_iy for a in self.all], dtype=np.int64),
            np.array([a.end_heading for a in self.all], dtype=np.int64),
            np.array([a.n_segments for a in self.all], dtype=np.int64),
            pts,
            head_ptr,
            np.array(head_idx, dtype=np.int64),
        )


def concatenate_actions(actions: list[ControlAction], cfg: LatticeConfig, delta: float,
                        start: LatticeVertex = LatticeVertex(0, 0, 0)) -> SampledPath:
    """Chain the sampled paths of applicable actions starting at ``start``."""
    pts = [np.array([[start.ix * cfg.dx, start.iy * cfg.dy]])]
    u, i = start, 0
    for a in actions:
        off = np.array([u.ix * cfg.dx, u.iy * cfg.dy])
        pts.append(a.path.points[1:] + off)
        u, i = apply_control_action(u, a, i)
    return SampledPath(np.vstack(pts), delta)


# --- JSON -----------------------------------------------------------------

def control_set_to_dict(cs: ControlSet) -> dict:
    n = cs.cfg.n_headings
    return {
        "lattice": cs.cfg.to_dict(),
        "delta": cs.delta,
        "actions": [
            {
                "start_heading_index": a.start_heading,
                "dx": a.delta_ix,
                "dy": a.delta_iy,
                "dtheta_index": (a.end_heading - a.start_heading) % n,
                "arc_length": a.arc_length,
                "coeffs": list(a.coeffs),
                "sampled_points": a.path.points.tolist(),
            }
            for a in cs.all
        ],
    }


def control_set_from_dict(d: dict) -> ControlSet:
    try:
        cfg = LatticeConfig.from_dict(d["lattice"])
        delta = float(d["delta"])
        actions = []
        for a in d["actions"]:
            h = int(a["start_heading_index"])
            actions.append(
                ControlAction(
                    start_heading=h,
                    delta_ix=int(a["dx"]),
                    delta_iy=int(a["dy"]),
                    end_heading=(h + int(a["dtheta_index"])) % cfg.n_headings,
                    path=SampledPath(np.array(a["sampled_points"], dtype=float), delta),
                    arc_length=float(a["arc_length"]),
                    coeffs=tuple(float(c) for c in a.get("coeffs", ())),
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid control set: {exc}") from None
    return ControlSet(actions, cfg, delta)


def save_control_set(cs: ControlSet, path: str | Path) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    Path(path).write_text(json.dumps(control_set_to_dict(cs), indent=1) + "\n")


def load_control_set(path: str | Path) -> ControlSet:
    return control_set_from_dict(json.loads(Path(path).read_text()))
