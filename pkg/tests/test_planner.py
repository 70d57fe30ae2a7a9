import itertools
import math

import numpy as np
import pytest

from sparselattice.errors import EmptyGoal, NoPlan
from sparselattice.geometry import Pose2D, SampledPath, curvature_profile, resample_by_arclength
from sparselattice.lattice import (ControlAction, ControlSet, LatticeConfig, LatticeVertex,
                                   apply_control_action, vertex_pose)
from sparselattice.planner import (OccupancyGrid, PlannerConfig, Scenario, SwathTable,
                                   VehicleFootprint, collision_free, heuristic_admissible,
                                   load_scenario, plan, restrict_to_lane, save_scenario,
                                   scenario_from_path, select_goal_vertices, swath_cells, synth_worlds)

from conftest import straight_action
from instances import DELTA, FOUR, hermite_action

FP = VehicleFootprint()


def empty_grid(x0=-10.0, y0=-10.0, w=100, h=100, r=0.2):
    return OccupancyGrid(Pose2D(x0, y0, 0.0), r, np.zeros((h, w), dtype=bool))


def fine_oracle_hits(u, c, grid, fp, cfg, factor=4):
    """Footprint sampled at 4x finer steps along the action, tested against cell centres."""
    pts = c.path.points + (u.ix * cfg.dx, u.iy * cfg.dy)
    t = np.linspace(0, len(pts) - 1, factor * (len(pts) - 1) + 1)
    fine = np.column_stack([np.interp(t, np.arange(len(pts)), pts[:, 0]),
                            np.interp(t, np.arange(len(pts)), pts[:, 1])])
    d = np.gradient(fine, axis=0)
    th = np.arctan2(d[:, 1], d[:, 0])
    rows, cols = np.nonzero(grid.occupied)
    cx = grid.origin.x + (cols + 0.5) * grid.resolution
    cy = grid.origin.y + (rows + 0.5) * grid.resolution
    xmax = grid.origin.x + grid.width * grid.resolution
    ymax = grid.origin.y + grid.height * grid.resolution
    for (x, y), a in zip(fine, th):
        corners = fp.corners(x, y, a)
        if (corners[:, 0].min() < grid.origin.x or corners[:, 1].min() < grid.origin.y
                or corners[:, 0].max() > xmax or corners[:, 1].max() > ymax):
            return True
        lon = (cx - x) * math.cos(a) + (cy - y) * math.sin(a)
        lat = -(cx - x) * math.sin(a) + (cy - y) * math.cos(a)
        inside = (np.abs(lon - fp.center_offset) <= fp.length / 2) & (np.abs(lat) <= fp.width / 2)
        if inside.any():
            return True
    return False


# --- swaths -------------------------------------------------------------------

def test_straight_swath_extent():
    cfg = LatticeConfig()
    a = straight_action(0, 5, cfg, 0.1)  # 2 m
    cells = swath_cells(a, FP, 0.2)
    span = cells[:, 0].max() - cells[:, 0].min() + 1
    assert abs(span - (2 + 4.5) / 0.2) <= 1
    area = (2 + 4.5) * 1.7
    assert abs(len(cells) * 0.04 - area) / area < 0.10


def test_zero_length_swath_is_one_rectangle():
    c = ControlAction(0, 0, 0, 0, SampledPath(np.zeros((1, 2)), 0.1), 0.0)
    cells = swath_cells(c, FP, 0.2)
    assert len(cells) * 0.04 == pytest.approx(4.5 * 1.7, rel=0.1)
    assert cells[:, 0].max() - cells[:, 0].min() + 1 == pytest.approx(4.5 / 0.2, abs=1)


def hausdorff(a, b):
    d = np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def test_rotated_swath(dense):
    for a in dense.by_heading[0][::15]:
        b = next(x for x in dense.by_heading[4]
                 if (x.delta_ix, x.delta_iy, x.end_heading) == (-a.delta_iy, a.delta_ix, (a.end_heading + 4) % 16))
        sa, sb = swath_cells(a, FP, 0.2), swath_cells(b, FP, 0.2)
        # rotate cell a by +90 degrees about the start corner: centre (i+.5, j+.5) -> (-(j+.5), i+.5)
        rot = np.column_stack([-sa[:, 1] - 1, sa[:, 0]])
        assert hausdorff(rot, sb) <= 1


# --- collision checks -----------------------------------------------------------

def test_collision_free_empty_and_wall(dense):
    g = empty_grid()
    cfg = dense.cfg
    a = straight_action(0, 10, cfg, 0.1)  # 4 m
    u = LatticeVertex(0, 0, 0)
    assert collision_free(u, a, g, fp=FP, cfg=cfg)
    col = g.corner_cell(2.0, 0.0)[0]
    g.occupied[:, col] = True
    assert not collision_free(u, a, g, fp=FP, cfg=cfg)


def test_out_of_bounds_is_collision():
    g = empty_grid(0, 0, 20, 20)
    cfg = LatticeConfig()
    assert not collision_free(LatticeVertex(0, 0, 0), straight_action(0, 2, cfg, 0.1), g, fp=FP, cfg=cfg)


def test_fine_sampling_agreement(dense):
    rng = np.random.default_rng(0)
    sw = SwathTable(dense, FP, 0.2)
    agree = 0
    for trial in range(100):
        g = empty_grid()
        g.occupied = rng.random(g.occupied.shape) < 0.004
        a = dense.all[int(rng.integers(len(dense)))]
        u = LatticeVertex(int(rng.integers(-3, 4)), int(rng.integers(-3, 4)), a.start_heading)
        mine = collision_free(u, a, g, swaths=sw)
        agree += mine == (not fine_oracle_hits(u, a, g, FP, dense.cfg))
    assert agree == 100


# --- goals --------------------------------------------------------------------

def test_goal_on_lattice_first():
    cfg = LatticeConfig()
    goals = select_goal_vertices(Pose2D(1.2, 0.8, cfg.headings[2]), cfg)
    assert goals[0] == (3, 2, 2)


def test_goal_heading_tiebreak():
    cfg = LatticeConfig()
    g = Pose2D(0.2, 0.0, 0.0)  # equidistant from ix=0 and ix=1
    goals = select_goal_vertices(g, cfg, radius=0.3)
    assert goals[0].itheta == 0 and goals[1].itheta == 0
    with pytest.raises(EmptyGoal):
        select_goal_vertices(Pose2D(0.2, 0.2, 0.0), cfg, radius=0.1)


def test_goal_order_matches_bruteforce():
    cfg = LatticeConfig()
    goal = Pose2D(3.33, -1.17, 2.0)
    got = select_goal_vertices(goal, cfg, 1.5, 1.0, 2.0)
    brute = []
    for i, j, h in itertools.product(range(-20, 30), range(-20, 20), range(16)):
        d = math.hypot(i * 0.4 - goal.x, j * 0.4 - goal.y)
        if d <= 1.5:
            dth = abs((cfg.headings[h] - goal.theta + math.pi) % (2 * math.pi) - math.pi)
            brute.append((d + 2.0 * dth, (i, j, h)))
    brute.sort()
    assert [tuple(v) for v in got] == [v for _, v in brute]


# --- planning -----------------------------------------------------------------

def straight_ref(length, delta=0.1):
    return resample_by_arclength(np.array([[0.0, 0.0], [length, 0.0]]), delta)


def test_straight_corridor(dense):
    sc = scenario_from_path(straight_ref(20.0), 3.7, "lane_follow")
    res = plan(sc, dense)
    longest = max(a.arc_length for a in dense)
    assert abs(res.cost - 20.0) <= longest
    assert np.abs(res.path.points[:, 1]).max() < 0.5
    assert res.path.points[0].tolist() == [0.0, 0.0]
    assert heuristic_admissible(res, dense.cfg)


def test_blocked_corridor(dense):
    sc = scenario_from_path(straight_ref(20.0), 3.7, "lane_follow")
    col = sc.grid.corner_cell(10.0, 0.0)[0]
    sc.grid.occupied[:, col : col + 2] = True
    with pytest.raises(NoPlan):
        plan(sc, dense)


def brute_force_plan_cost(sc, cs, target, fp, depth):
    best = math.inf
    sw = SwathTable(cs, fp, sc.grid.resolution)

    def dfs(u, cost, d):
        nonlocal best
        if cost >= best:
            return
        if u == target:
            best = cost
            return
        if d == depth:
            return
        for a in cs.by_heading[u.itheta]:
            if collision_free(u, a, sc.grid, swaths=sw):
                v, _ = apply_control_action(u, a, 0)
                dfs(v, cost + a.arc_length, d + 1)

    dfs(LatticeVertex(0, 0, 0), 0.0, 0)
    return best


def test_plan_vs_enumeration():
    fp = VehicleFootprint(0.4, 0.3, 0.0)
    acts = [hermite_action(h, 1, 0, 0) for h in range(4)]
    acts += [hermite_action(h, 1, s, s) for h in range(4) for s in (-1, 1)]
    cs = ControlSet(acts, FOUR, DELTA)
    rng = np.random.default_rng(0)
    ref = straight_ref(2.0, DELTA)
    compared = 0
    for trial in range(12):
        occ = rng.random((16, 20)) < 0.12
        grid = OccupancyGrid(Pose2D(-1.0, -2.0, 0.0), 0.25, occ)
        grid.occupied[7:9, 3:6] = False  # keep the start free
        gx, gy = float(rng.integers(1, 6)) * 0.5, float(rng.integers(-3, 4)) * 0.5
        sc = Scenario(grid, Pose2D(0, 0, 0), Pose2D(gx, gy, 0.0), ref, "lane_follow")
        cfg = PlannerConfig(fp, goal_radius=0.3)
        try:
            res = plan(sc, cs, cfg)
        except NoPlan:
            continue
        bf = brute_force_plan_cost(sc, cs, res.goal, fp, 9)
        assert res.cost <= bf + 1e-9
        if math.isfinite(bf):
            assert res.cost == pytest.approx(bf)
            compared += 1
        assert heuristic_admissible(res, FOUR)
    assert compared >= 5


def test_plan_deterministic_and_collision_free(dense):
    (w,) = synth_worlds(1, seed=5)
    sw = SwathTable(dense, FP, 0.2)
    r1, r2 = plan(w, dense, swaths=sw), plan(w, dense, swaths=sw)
    assert [a.key for a in r1.actions] == [a.key for a in r2.actions]
    assert r1.expansions == r2.expansions and r1.cost == r2.cost
    u = r1.start
    for a in r1.actions:
        assert not fine_oracle_hits(u, a, w.grid, FP, dense.cfg)
        u, _ = apply_control_action(u, a, 0)
    assert heuristic_admissible(r1, dense.cfg)


# --- scenarios ----------------------------------------------------------------

def seg_distance(px, py, line):
    a, b = line[:-1], line[1:]
    ab = b - a
    t = ((px[..., None] - a[:, 0]) * ab[:, 0] + (py[..., None] - a[:, 1]) * ab[:, 1]) / (ab ** 2).sum(1)
    t = np.clip(t, 0, 1)
    dx = px[..., None] - (a[:, 0] + t * ab[:, 0])
    dy = py[..., None] - (a[:, 1] + t * ab[:, 1])
    return np.sqrt(dx ** 2 + dy ** 2).min(-1)


def test_straight_lane_follow_corridor():
    sc = scenario_from_path(straight_ref(10.0), 3.7, "lane_follow", extension=6.0)
    xs, ys = sc.grid.cell_centers()
    free = ~sc.grid.occupied
    inside = (np.abs(ys) <= 1.85) & (xs >= -6.0) & (xs <= 16.0)
    edge = (np.abs(np.abs(ys) - 1.85) < 1e-9) | (np.abs(xs + 6) < 1e-9) | (np.abs(xs - 16) < 1e-9)
    assert (free[~edge] == inside[~edge]).all()
    assert sc.goal.as_tuple() == pytest.approx((10.0, 0.0, 0.0))
    assert sc.start.as_tuple() == pytest.approx((0.0, 0.0, 0.0))


def test_lane_change_goal():
    left = scenario_from_path(straight_ref(10.0), 3.7, "lane_change", seed=0)
    right = scenario_from_path(straight_ref(10.0), 3.7, "lane_change", seed=1)
    assert left.goal.as_tuple() == pytest.approx((10.0, 3.7, 0.0))
    assert right.goal.as_tuple() == pytest.approx((10.0, -3.7, 0.0))


def test_signed_distance_oracle():
    s = np.linspace(0, 12, 400)
    ref = resample_by_arclength(np.column_stack([s, 2.0 * np.sin(s / 4.0)]), 0.1)
    sc = scenario_from_path(ref, 3.7, "lane_change", seed=0, extension=6.0)
    pts = ref.points
    t0, t1 = pts[1] - pts[0], pts[-1] - pts[-2]
    t0, t1 = t0 / np.hypot(*t0), t1 / np.hypot(*t1)
    line = np.vstack([pts[0] - 6 * t0, pts, pts[-1] + 6 * t1])
    xs, ys = sc.grid.cell_centers()
    d1 = seg_distance(xs, ys, line)
    free = ~sc.grid.occupied
    lane1 = d1 <= 1.85
    # cells of lane 1 away from its boundary and from the flat end caps are free
    near_end = np.minimum(np.hypot(xs - line[0, 0], ys - line[0, 1]),
                          np.hypot(xs - line[-1, 0], ys - line[-1, 1])) < 2.0
    core = lane1 & (d1 < 1.85 - 0.01) & ~near_end
    assert free[core].all()
    # free cells are either in lane 1 or within lane_width/2 of the left offset line
    off = seg_distance(xs, ys, line + 3.7 * np.column_stack(
        [-np.gradient(line[:, 1]), np.gradient(line[:, 0])]) / np.hypot(*np.gradient(line, axis=0).T)[:, None])
    assert (lane1 | (off <= 1.85 + 0.05))[free].all()


def test_synth_worlds_properties(dense):
    a, b = synth_worlds(3, seed=4), synth_worlds(3, seed=4)
    for w1, w2 in zip(a, b):
        assert (w1.grid.occupied == w2.grid.occupied).all()
        assert w1.goal == w2.goal
        k = curvature_profile(w1.reference_path)
        assert np.abs(k).max() <= 0.1
        assert w1.kind == "double_swerve" and len(w1.obstacles) == 1
    with pytest.raises(NoPlan):
        plan(restrict_to_lane(a[0]), dense)


def test_scenario_roundtrip(tmp_path):
    (w,) = synth_worlds(1, seed=9)
    f = tmp_path / "s.json"
    save_scenario(w, f)
    back = load_scenario(f)
    assert (back.grid.occupied == w.grid.occupied).all()
    assert back.grid.origin == w.grid.origin and back.goal == w.goal and back.start == w.start
    assert back.reference_path.equals(w.reference_path)
    assert back.scenario_id == w.scenario_id
