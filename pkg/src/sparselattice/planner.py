"""Lattice A* planner with swath collision checking, plus scenario construction."""

from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import shapely
from shapely.geometry import LineString, Polygon

from .errors import EmptyGoal, NoPlan
from .geometry import Pose2D, SampledPath, resample_by_arclength, wrap_angle
from .lattice import (ControlAction, ControlSet, LatticeConfig, LatticeVertex,
                      apply_control_action, concatenate_actions, snap_to_lattice, vertex_pose)

KINDS = ("lane_follow", "lane_change", "double_swerve")


@dataclass(frozen=True)
class VehicleFootprint:
    length: float = 4.5
    width: float = 1.7
    center_offset: float = 1.35  # rear axle (reference point) to footprint centre

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("footprint dimensions must be positive")

    def corners(self, x: float, y: float, theta: float) -> np.ndarray:
        c, s = math.cos(theta), math.sin(theta)
        lo, hi = self.center_offset - self.length / 2, self.center_offset + self.length / 2
        w = self.width / 2
        local = np.array([[lo, -w], [hi, -w], [hi, w], [lo, w]])
        return local @ np.array([[c, s], [-s, c]]) + (x, y)


@dataclass
class OccupancyGrid:
    """``occupied[row, col]``; cell (col, row) spans [x0 + col*r, x0 + (col+1)*r)."""

    origin: Pose2D
    resolution: float
    occupied: np.ndarray

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.occupied = np.ascontiguousarray(self.occupied, dtype=bool)

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        r = self.resolution
        xs = self.origin.x + (np.arange(self.width) + 0.5) * r
        ys = self.origin.y + (np.arange(self.height) + 0.5) * r
        return np.meshgrid(xs, ys)

    def corner_cell(self, x: float, y: float) -> tuple[int, int]:
        """Integer cell index of the grid corner at world (x, y)."""
        return (int(round((x - self.origin.x) / self.resolution)),
                int(round((y - self.origin.y) / self.resolution)))

    def rasterize_rect(self, corners: np.ndarray) -> np.ndarray:
        """(col, row) of all in-bounds cells whose centre lies in the convex quad."""
        cells = _rect_cells(corners - (self.origin.x, self.origin.y), self.resolution)
        ok = (cells[:, 0] >= 0) & (cells[:, 0] < self.width) & (cells[:, 1] >= 0) & (cells[:, 1] < self.height)
        return cells[ok]


def _rect_cells(corners: np.ndarray, r: float) -> np.ndarray:
    """Cells (relative to a corner at the local origin) whose centre lies in the quad."""
    lo = np.floor(corners.min(axis=0) / r - 0.5).astype(int)
    hi = np.ceil(corners.max(axis=0) / r - 0.5).astype(int)
    ci, cj = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1))
    cx, cy = (ci + 0.5) * r, (cj + 0.5) * r
    inside = np.ones(ci.shape, dtype=bool)
    for k in range(4):
        a, b = corners[k], corners[(k + 1) % 4]
        cross = (b[0] - a[0]) * (cy - a[1]) - (b[1] - a[1]) * (cx - a[0])
        inside &= cross >= -1e-12
    return np.column_stack([ci[inside], cj[inside]])


def _path_poses(c: ControlAction) -> np.ndarray:
    pts = c.path.points
    if len(pts) < 2:
        return np.array([[pts[0, 0], pts[0, 1], 0.0]])
    th = np.empty(len(pts))
    d = np.diff(pts, axis=0)
    chord = np.arctan2(d[:, 1], d[:, 0])
    th[0], th[-1] = chord[0], chord[-1]
    if len(pts) > 2:
        mid = pts[2:] - pts[:-2]
        th[1:-1] = np.arctan2(mid[:, 1], mid[:, 0])
    return np.column_stack([pts, th])


def swath_cells(c: ControlAction, fp: VehicleFootprint, resolution: float,
                heading: float | None = None) -> np.ndarray:
    """Cell offsets (col, row) covered by the footprint along ``c``.

    Offsets are relative to the start vertex, which must sit on a grid corner.
    ``heading`` overrides the pose heading for zero-length actions.
    """
    poses = _path_poses(c)
    if heading is not None and len(c.path) < 2:
        poses[0, 2] = heading
    cells = [_rect_cells(fp.corners(x, y, th), resolution) for x, y, th in poses]
    return np.unique(np.vstack(cells), axis=0)


@numba.njit(cache=True)
def _swath_hits(occ, offs, cx, cy):
    h, w = occ.shape
    for n in range(offs.shape[0]):
        i = offs[n, 0] + cx
        j = offs[n, 1] + cy
        if i < 0 or j < 0 or i >= w or j >= h:
            return True
        if occ[j, i]:
            return True
    return False


class SwathTable:
    """Lazily computed swaths of every action of a control set (read-only once built)."""

    def __init__(self, cs: ControlSet, fp: VehicleFootprint, resolution: float):
        self.cs, self.fp, self.resolution = cs, fp, resolution
        self._cache: dict[int, np.ndarray] = {}
        for d in (cs.cfg.dx, cs.cfg.dy):
            if abs(d / resolution - round(d / resolution)) > 1e-9:
                raise ValueError("lattice spacing must be a multiple of the grid resolution")

    def __getitem__(self, idx: int) -> np.ndarray:
        s = self._cache.get(idx)
        if s is None:
            s = np.ascontiguousarray(swath_cells(self.cs.all[idx], self.fp, self.resolution),
                                     dtype=np.int64)
            self._cache[idx] = s
        return s


def collision_free(u: LatticeVertex, c: ControlAction, grid: OccupancyGrid,
                   swaths: SwathTable | None = None, fp: VehicleFootprint | None = None,
                   cfg: LatticeConfig | None = None) -> bool:
    """True iff no swath cell of ``c`` placed at ``u`` is occupied or outside the grid."""
    if swaths is not None:
        offs = swaths[swaths.cs.index(c)]
        cfg = swaths.cs.cfg
    else:
        offs = np.ascontiguousarray(swath_cells(c, fp or VehicleFootprint(), grid.resolution),
                                    dtype=np.int64)
        cfg = cfg or LatticeConfig()
    cx, cy = grid.corner_cell(u.ix * cfg.dx, u.iy * cfg.dy)
    return not _swath_hits(grid.occupied, offs, cx, cy)


def pose_collides(grid: OccupancyGrid, fp: VehicleFootprint, x: float, y: float, theta: float) -> bool:
    cells = _rect_cells(fp.corners(x - grid.origin.x, y - grid.origin.y, theta), grid.resolution)
    ok = (cells[:, 0] >= 0) & (cells[:, 0] < grid.width) & (cells[:, 1] >= 0) & (cells[:, 1] < grid.height)
    if not ok.all():
        return True
    return bool(grid.occupied[cells[:, 1], cells[:, 0]].any())


def select_goal_vertices(goal: Pose2D, cfg: LatticeConfig, radius: float = 2.0,
                         w_pos: float = 1.0, w_heading: float = 2.0) -> list[LatticeVertex]:
    """Lattice vertices within ``radius`` of the goal, best (position + heading) first."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    i0, i1 = math.ceil((goal.x - radius) / cfg.dx), math.floor((goal.x + radius) / cfg.dx)
    j0, j1 = math.ceil((goal.y - radius) / cfg.dy), math.floor((goal.y + radius) / cfg.dy)
    hd = np.abs(wrap_angle(np.asarray(cfg.headings) - goal.theta))
    scored = []
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            dist = math.hypot(i * cfg.dx - goal.x, j * cfg.dy - goal.y)
            if dist > radius:
                continue
            for h in range(cfg.n_headings):
                scored.append((w_pos * dist + w_heading * hd[h], LatticeVertex(i, j, h)))
    if not scored:
        raise EmptyGoal("no lattice vertex within the goal radius")
    scored.sort()
    return [v for _, v in scored]


# --- scenarios ----------------------------------------------------------------

@dataclass
class Scenario:
    grid: OccupancyGrid
    start: Pose2D
    goal: Pose2D
    reference_path: SampledPath
    kind: str
    obstacles: list[np.ndarray] = field(default_factory=list)
    scenario_id: str = "0"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")


def _extended_line(ref: SampledPath, ext: float) -> np.ndarray:
    p = ref.points
    t0 = p[1] - p[0]
    t1 = p[-1] - p[-2]
    t0 /= np.hypot(*t0)
    t1 /= np.hypot(*t1)
    return np.vstack([p[0] - ext * t0, p, p[-1] + ext * t1])


def _lane_offset(line: np.ndarray, offset: float) -> np.ndarray:
    """Polyline shifted laterally by ``offset`` (positive = left)."""
    d = np.gradient(line, axis=0)
    n = np.column_stack([-d[:, 1], d[:, 0]]) / np.hypot(d[:, 0], d[:, 1])[:, None]
    return line + offset * n


def _grid_around(lines: list[np.ndarray], margin: float, resolution: float, align: float):
    pts = np.vstack(lines)
    lo = np.floor((pts.min(axis=0) - margin) / align) * align
    hi = np.ceil((pts.max(axis=0) + margin) / align) * align
    w = int(round((hi[0] - lo[0]) / resolution))
    h = int(round((hi[1] - lo[1]) / resolution))
    return Pose2D(float(lo[0]), float(lo[1]), 0.0), w, h


def _lane_free_mask(grid: OccupancyGrid, centerline: np.ndarray, lane_width: float) -> np.ndarray:
    lane = LineString(centerline).buffer(lane_width / 2, cap_style="flat", quad_segs=16)
    xs, ys = grid.cell_centers()
    return shapely.intersects_xy(lane, xs, ys)


def scenario_from_path(ref: SampledPath, lane_width: float = 3.7, kind: str = "lane_follow",
                       seed: int = 0, resolution: float = 0.2, extension: float = 6.0,
                       margin: float = 2.0, lattice: LatticeConfig | None = None,
                       side: int | None = None, scenario_id: str = "0") -> Scenario:
    """Occupancy grid with lane corridor(s) around ``ref``.

    The corridors extend ``extension`` metres beyond both ends of ``ref`` so
    the vehicle footprint fits at the start and goal. For lane changes the
    second lane lies left for even seeds and right for odd ones unless
    ``side`` (+1 left, -1 right) is given.
    """
    if ref.arc_length < 2.0:
        raise ValueError("reference path must be at least 2 m long")
    cfg = lattice or LatticeConfig()
    line = _extended_line(ref, extension)
    lines = [line]
    if side is None:
        side = 1 if seed % 2 == 0 else -1
    second = None
    if kind in ("lane_change", "double_swerve"):
        second = _lane_offset(line, side * lane_width)
        lines.append(second)
    align = _lcm_step(resolution, cfg.dx, cfg.dy)
    origin, w, h = _grid_around(lines, margin + lane_width, resolution, align)
    grid = OccupancyGrid(origin, resolution, np.ones((h, w), dtype=bool))
    free = _lane_free_mask(grid, line, lane_width)
    if second is not None:
        free |= _lane_free_mask(grid, second, lane_width)
    grid.occupied = ~free

    p = ref.points
    t0, t1 = p[1] - p[0], p[-1] - p[-2]
    start = Pose2D(p[0, 0], p[0, 1], math.atan2(t0[1], t0[0]))
    end_th = math.atan2(t1[1], t1[0])
    gx, gy = p[-1]
    if kind == "lane_change":
        gx -= side * lane_width * math.sin(end_th)
        gy += side * lane_width * math.cos(end_th)
    return Scenario(grid, start, Pose2D(gx, gy, end_th), ref, kind, [], scenario_id)


def _lcm_step(*steps: float) -> float:
    q = 1e-6
    ints = [int(round(s / q)) for s in steps]
    lcm = ints[0]
    for v in ints[1:]:
        lcm = lcm * v // math.gcd(lcm, v)
    return lcm * q


def clothoid_centerline(segments: list[tuple[str, float, float]], delta: float = 0.1,
                        step: float = 0.01) -> SampledPath:
    """Centerline from (kind, length, peak curvature) segments starting at the origin.

    ``"straight"`` has zero curvature; ``"clothoid"`` ramps linearly from 0 to
    the peak and back to 0 over its length.
    """
    kappas = []
    for kind, length, peak in segments:
        n = max(int(round(length / step)), 2)
        s = np.linspace(0.0, length, n, endpoint=False)
        if kind == "straight":
            kappas.append(np.zeros(n))
        else:
            kappas.append(peak * (1.0 - np.abs(2.0 * s / length - 1.0)))
    kappa = np.concatenate(kappas + [[0.0]])
    theta = np.concatenate([[0.0], np.cumsum(0.5 * (kappa[1:] + kappa[:-1]) * step)])
    mid = 0.5 * (theta[1:] + theta[:-1])
    xy = np.zeros((len(theta), 2))
    xy[1:, 0] = np.cumsum(np.cos(mid) * step)
    xy[1:, 1] = np.cumsum(np.sin(mid) * step)
    return resample_by_arclength(xy, delta)


def synth_worlds(n: int, seed: int = 0, lane_width: float = 3.7, resolution: float = 0.2,
                 delta: float = 0.1, fp: VehicleFootprint = VehicleFootprint(),
                 lattice: LatticeConfig | None = None, n_segments: int = 4) -> list[Scenario]:
    """Two-lane double-swerve worlds with an obstacle blocking lane 1."""
    if n < 1:
        raise ValueError("n must be at least 1")
    out = []
    for w in range(n):
        rng = np.random.default_rng([seed, w])
        segs = []
        for k in range(n_segments):
            length = float(rng.uniform(5.0, 15.0))
            if k % 2 == 0:
                segs.append(("straight", length, 0.0))
            else:
                segs.append(("clothoid", length, float(rng.uniform(-0.1, 0.1))))
        ref = clothoid_centerline(segs, delta)
        side = 1 if rng.random() < 0.5 else -1
        sc = scenario_from_path(ref, lane_width, "double_swerve", seed=w, resolution=resolution,
                                lattice=lattice, side=side, scenario_id=f"w{w:03d}")
        frac = float(rng.uniform(0.3, 0.6))
        k = int(round(frac * (len(ref) - 1)))
        k = min(max(k, 1), len(ref) - 2)
        (ox, oy), th = ref.points[k], ref.headings[k]
        body = VehicleFootprint(fp.length, fp.width, 0.0)
        corners = body.corners(ox, oy, th)
        cells = sc.grid.rasterize_rect(corners)
        sc.grid.occupied[cells[:, 1], cells[:, 0]] = True
        sc.obstacles.append(corners)
        out.append(sc)
    return out


def restrict_to_lane(sc: Scenario, lane_width: float = 3.7, extension: float = 6.0) -> Scenario:
    """Copy of ``sc`` with everything outside lane 1 marked occupied."""
    line = _extended_line(sc.reference_path, extension)
    lane1 = _lane_free_mask(sc.grid, line, lane_width)
    grid = OccupancyGrid(sc.grid.origin, sc.grid.resolution, sc.grid.occupied | ~lane1)
    return Scenario(grid, sc.start, sc.goal, sc.reference_path, sc.kind, list(sc.obstacles),
                    sc.scenario_id)


# --- planning ---------------------------------------------------------------

@dataclass(frozen=True)
class PlannerConfig:
    footprint: VehicleFootprint = VehicleFootprint()
    goal_radius: float = 2.0
    w_pos: float = 1.0
    w_heading: float = 2.0
    max_pops: int | None = None


@dataclass
class PlanResult:
    path: SampledPath | None
    actions: list[ControlAction]
    expansions: int
    wall_time: float
    cost: float = math.inf
    pops: int = 0
    goal: LatticeVertex | None = None
    success: bool = True
    start: LatticeVertex | None = None


def plan(s: Scenario, cs: ControlSet, cfg: PlannerConfig = PlannerConfig(),
         swaths: SwathTable | None = None) -> PlanResult:
    """A* over collision-free action applications with arc-length edge costs.

    The search targets the best-ranked collision-free goal vertex. If that
    vertex turns out unreachable, the next reachable one in rank order is
    returned (every closed state has its optimal cost at that point).
    ``expansions`` counts edge evaluations (one collision check each).
    """
    t0 = time.perf_counter()
    lat = cs.cfg
    if swaths is None:
        swaths = SwathTable(cs, cfg.footprint, s.grid.resolution)
    start = snap_to_lattice(s.start, lat)
    goals = [g for g in select_goal_vertices(s.goal, lat, cfg.goal_radius, cfg.w_pos, cfg.w_heading)
             if not pose_collides(s.grid, cfg.footprint, *vertex_pose(g, lat).as_tuple())]
    if not goals:
        raise NoPlan("every goal vertex is in collision")
    target = goals[0]
    tx, ty = target.ix * lat.dx, target.iy * lat.dy

    def h(v: LatticeVertex) -> float:
        return math.hypot(tx - v.ix * lat.dx, ty - v.iy * lat.dy)

    pk = cs.packed
    occ = s.grid.occupied
    g = {start: 0.0}
    pred: dict[LatticeVertex, tuple[LatticeVertex, int]] = {}
    closed: set[LatticeVertex] = set()
    heap = [(h(start), h(start), start)]
    edges = 0
    pops = 0
    reached = None
    while heap:
        f, hv, u = heapq.heappop(heap)
        if u in closed:
            continue
        closed.add(u)
        pops += 1
        if u == target:
            reached = u
            break
        if cfg.max_pops is not None and pops >= cfg.max_pops:
            break
        gu = g[u]
        cx, cy = s.grid.corner_cell(u.ix * lat.dx, u.iy * lat.dy)
        for p in range(pk.head_ptr[u.itheta], pk.head_ptr[u.itheta + 1]):
            a = int(pk.head_idx[p])
            v = LatticeVertex(u.ix + int(pk.dix[a]), u.iy + int(pk.diy[a]), int(pk.end_h[a]))
            if v in closed:
                continue
            edges += 1
            if _swath_hits(occ, swaths[a], cx, cy):
                continue
            nc = gu + cs.all[a].arc_length
            if nc < g.get(v, math.inf):
                g[v] = nc
                pred[v] = (u, a)
                hv = h(v)
                heapq.heappush(heap, (nc + hv, hv, v))
    if reached is None and cfg.max_pops is None:
        reached = next((gv for gv in goals if gv in closed), None)
    wall = time.perf_counter() - t0
    if reached is None:
        raise NoPlan(f"no goal vertex reachable from {start}", edges, wall)

    seq = []
    v = reached
    while v != start:
        u, a = pred[v]
        seq.append(cs.all[a])
        v = u
    seq.reverse()
    path = concatenate_actions(seq, lat, cs.delta, start=start) if seq else None
    return PlanResult(path, seq, edges, wall, g[reached], pops, reached, True, start)


def heuristic_admissible(res: PlanResult, cfg: LatticeConfig) -> bool:
    """Check h <= true cost-to-go at every vertex of a solved plan."""
    if res.goal is None:
        return True
    tx, ty = res.goal.ix * cfg.dx, res.goal.iy * cfg.dy
    remaining = res.cost
    u = res.start
    for a in res.actions:
        if math.hypot(tx - u.ix * cfg.dx, ty - u.iy * cfg.dy) > remaining + 1e-9:
            return False
        u, _ = apply_control_action(u, a, 0)
        remaining -= a.arc_length
    return True


# --- serialization ------------------------------------------------------------

def _rle(bits: np.ndarray) -> list[int]:
    flat = bits.ravel().astype(np.int8)
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate([[0], change, [len(flat)]])
    runs = np.diff(bounds).tolist()
    return [int(flat[0])] + runs


def _unrle(rle: list[int], shape: tuple[int, int]) -> np.ndarray:
    val, runs = rle[0], rle[1:]
    out = np.empty(sum(runs), dtype=bool)
    pos = 0
    for r in runs:
        out[pos : pos + r] = bool(val)
        pos += r
        val = 1 - val
    return out.reshape(shape)


def scenario_to_dict(sc: Scenario) -> dict:
    g = sc.grid
    return {
        "id": sc.scenario_id,
        "kind": sc.kind,
        "grid": {
            "origin": [g.origin.x, g.origin.y],
            "resolution": g.resolution,
            "width": g.width,
            "height": g.height,
            "occupancy_rle": _rle(g.occupied),
        },
        "start": list(sc.start.as_tuple()),
        "goal": list(sc.goal.as_tuple()),
        "reference_path": {"delta": sc.reference_path.delta,
                           "points": sc.reference_path.points.tolist()},
        "obstacles": [o.tolist() for o in sc.obstacles],
    }


def scenario_from_dict(d: dict) -> Scenario:
    g = d["grid"]
    occ = _unrle(g["occupancy_rle"], (int(g["height"]), int(g["width"])))
    grid = OccupancyGrid(Pose2D(g["origin"][0], g["origin"][1], 0.0), float(g["resolution"]), occ)
    ref = SampledPath(np.array(d["reference_path"]["points"]), float(d["reference_path"]["delta"]))
    return Scenario(grid, Pose2D(*d["start"]), Pose2D(*d["goal"]), ref, d["kind"],
                    [np.array(o) for o in d.get("obstacles", [])], str(d.get("id", "0")))


def save_scenario(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc)) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))
