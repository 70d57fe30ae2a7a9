"""Reachability-preserving control-set reduction (comparison baseline).

An action is dropped when already-kept, shorter actions reach its exact
endpoint within ``factor`` times its arc length. Actions are visited in
order of increasing length, so the result is a simple approximation of the
classic reachability-preserving reduction rather than an incremental one.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .lattice import ControlAction, ControlSet, LatticeVertex, apply_control_action


def _reaches_within(kept: dict[int, list[ControlAction]], start_h: int, goal: LatticeVertex,
                    limit: float, dx: float, dy: float) -> float:
    """Shortest kept-action arc length from (0, 0, start_h) to ``goal``, or inf past ``limit``.

    A* with the straight-line distance as heuristic; states whose optimistic
    total exceeds ``limit`` are never pushed.
    """
    gx, gy = goal.ix * dx, goal.iy * dy

    def h(v):
        return math.hypot(gx - v.ix * dx, gy - v.iy * dy)

    start = LatticeVertex(0, 0, start_h)
    g = {start: 0.0}
    heap = [(h(start), 0.0, start)]
    tol = 1e-9
    while heap:
        f, cost, u = heapq.heappop(heap)
        if cost > g.get(u, math.inf):
            continue
        if u == goal:
            return cost
        for a in kept.get(u.itheta, ()):
            v, _ = apply_control_action(u, a, 0)
            nc = cost + a.arc_length
            if nc + h(v) > limit + tol:
                continue
            if nc < g.get(v, math.inf) - tol:
                g[v] = nc
                heapq.heappush(heap, (nc + h(v), nc, v))
    return math.inf


def reduce_control_set_dl(dense: ControlSet, factor: float = 1.1) -> ControlSet:
    """Keep only actions that cannot be composed from shorter kept ones."""
    if factor < 1:
        raise ValueError("factor must be at least 1")
    cfg = dense.cfg
    order = sorted(range(len(dense)), key=lambda i: (dense.all[i].arc_length, i))
    shortest_straight = {}
    for a in dense.all:
        if a.is_straight:
            cur = shortest_straight.get(a.start_heading)
            if cur is None or a.arc_length < cur.arc_length:
                shortest_straight[a.start_heading] = a

    kept: dict[int, list[ControlAction]] = {}
    kept_idx = []
    for i in order:
        a = dense.all[i]
        forced = shortest_straight.get(a.start_heading) is a
        if not forced:
            goal = LatticeVertex(a.delta_ix, a.delta_iy, a.end_heading)
            limit = factor * a.arc_length
            if _reaches_within(kept, a.start_heading, goal, limit, cfg.dx, cfg.dy) <= limit + 1e-9:
                continue
        kept.setdefault(a.start_heading, []).append(a)
        kept_idx.append(i)
    return ControlSet([dense.all[i] for i in sorted(kept_idx)], cfg, dense.delta)


def kept_path_length(reduced: ControlSet, a: ControlAction, limit: float = math.inf) -> float:
    """Shortest arc length over ``reduced`` actions to ``a``'s endpoint (for checks)."""
    return _reaches_within(reduced.by_heading, a.start_heading,
                           LatticeVertex(a.delta_ix, a.delta_iy, a.end_heading),
                           limit, reduced.cfg.dx, reduced.cfg.dy)


def reachable_vertices(cs: ControlSet, start_heading: int, window: int = 20,
                       margin: int | None = None) -> np.ndarray:
    """Boolean array ``[heading, ix + window, iy + window]`` of vertices reachable from
    (0, 0, start_heading) whose position lies within ``|ix|, |iy| <= window``.

    Paths may leave the window by up to ``margin`` cells on the way (default:
    twice the largest action displacement). Compare two sets with the same
    margin.
    """
    pk = cs.packed
    if margin is None:
        margin = 2 * int(max(np.abs(pk.dix).max(initial=0), np.abs(pk.diy).max(initial=0)))
    R = window + margin
    n = 2 * R + 1
    H = cs.cfg.n_headings
    seen = np.zeros((H, n, n), dtype=bool)
    seen[start_heading, R, R] = True
    frontier = seen.copy()
    while frontier.any():
        new = np.zeros_like(seen)
        for a in range(len(cs)):
            src = frontier[pk.start_h[a]]
            dx, dy = int(pk.dix[a]), int(pk.diy[a])
            if abs(dx) >= n or abs(dy) >= n:
                continue
            xs = slice(max(0, -dx), n - max(0, dx))
            xd = slice(max(0, dx), n - max(0, -dx))
            ys = slice(max(0, -dy), n - max(0, dy))
            yd = slice(max(0, dy), n - max(0, -dy))
            new[pk.end_h[a], xd, yd] |= src[xs, ys]
        frontier = new & ~seen
        seen |= frontier
    return seen[:, margin : margin + 2 * window + 1, margin : margin + 2 * window + 1]
