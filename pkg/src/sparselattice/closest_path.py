"""Closest lattice path to a dataset path under the arc-length-locked measure.

The search graph holds one copy of every lattice vertex per path-point count
``k``. Successors always have a larger ``k``, so processing layers in
increasing ``k`` is a topological order and a single dynamic-programming pass
is exact. A greedy upper bound on the optimum prunes every layer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
from numba import types
from numba.typed import Dict
import numpy as np

from .errors import Explosion, NoPath, Stuck
from .geometry import SampledPath
from .lattice import (ControlAction, ControlSet, LatticeVertex, apply_control_action,
                      concatenate_actions, vertex_pose)
from .scoring import ScoreContext, score_paths, score_subpath

_OFF = 1 << 20
_HBITS = 64


@numba.njit(cache=True)
def _edge_score(pd, pts, a, n, ox, oy, k1, K, cutoff):
    """Max distance of action ``a`` placed at (ox, oy) against pd[k1:]; stops early above cutoff."""
    stop = min(n, K - 1 - k1)
    best = 0.0
    for m in range(stop + 1):
        ddx = pd[k1 + m, 0] - (pts[a, m, 0] + ox)
        ddy = pd[k1 + m, 1] - (pts[a, m, 1] + oy)
        dist = math.sqrt(ddx * ddx + ddy * ddy)
        if dist > best:
            best = dist
            if best > cutoff:
                return best
    return best


@numba.njit(cache=True)
def _grow(arr, size):
    out = np.empty(size, dtype=arr.dtype)
    out[: arr.shape[0]] = arr
    return out


@numba.njit(cache=True)
def _vkey(ix, iy, ith):
    return ((ix + _OFF) * (2 * _OFF) + (iy + _OFF)) * _HBITS + ith


@numba.njit(cache=True)
def _closest_path_kernel(pd, start_h, dix, diy, end_h, nseg, pts, head_ptr, head_idx,
                         dx, dy, bound, origin_h):
    K = pd.shape[0]
    cap = 1024
    s_ix = np.empty(cap, np.int64)
    s_iy = np.empty(cap, np.int64)
    s_th = np.empty(cap, np.int64)
    s_k = np.empty(cap, np.int64)
    s_cost = np.empty(cap, np.float64)
    s_pred = np.empty(cap, np.int64)
    s_act = np.empty(cap, np.int64)
    s_next = np.empty(cap, np.int64)
    layer_head = np.full(K, -1, np.int64)
    layer_size = np.zeros(K, np.int64)
    expanded = np.empty(cap, np.int64)
    n_exp = 0
    n_edges = 0
    lookup = Dict.empty(key_type=types.int64, value_type=types.int64)

    s_ix[0] = 0
    s_iy[0] = 0
    s_th[0] = origin_h
    s_k[0] = 0
    s_cost[0] = 0.0
    s_pred[0] = -1
    s_act[0] = -1
    s_next[0] = -1
    layer_head[0] = 0
    layer_size[0] = 1
    lookup[_vkey(0, 0, origin_h) * K] = 0
    n = 1

    B = bound
    best_state = -1
    best_cost = np.inf

    for i in range(K - 1):
        cnt = layer_size[i]
        if cnt == 0:
            continue
        ids = np.empty(cnt, np.int64)
        order_key = np.empty(cnt, np.int64)
        sid = layer_head[i]
        c = 0
        while sid != -1:
            ids[c] = sid
            order_key[c] = _vkey(s_ix[sid], s_iy[sid], s_th[sid])
            c += 1
            sid = s_next[sid]
        ids = ids[np.argsort(order_key)]

        for u in ids:
            cu = s_cost[u]
            if cu > B:
                continue
            if n_exp >= expanded.shape[0]:
                expanded = _grow(expanded, 2 * expanded.shape[0])
            expanded[n_exp] = u
            n_exp += 1
            ox = s_ix[u] * dx
            oy = s_iy[u] * dy
            h = s_th[u]
            for p in range(head_ptr[h], head_ptr[h + 1]):
                a = head_idx[p]
                n_edges += 1
                d = _edge_score(pd, pts, a, nseg[a], ox, oy, i, K, B)
                if d > B:
                    continue
                j = i + nseg[a]
                if j > K - 1:
                    j = K - 1
                vix = s_ix[u] + dix[a]
                viy = s_iy[u] + diy[a]
                vth = end_h[a]
                new = cu if cu > d else d
                key = _vkey(vix, viy, vth) * K + j
                if key in lookup:
                    v = lookup[key]
                else:
                    v = -1
                if v == -1:
                    if n >= cap:
                        cap *= 2
                        s_ix = _grow(s_ix, cap)
                        s_iy = _grow(s_iy, cap)
                        s_th = _grow(s_th, cap)
                        s_k = _grow(s_k, cap)
                        s_cost = _grow(s_cost, cap)
                        s_pred = _grow(s_pred, cap)
                        s_act = _grow(s_act, cap)
                        s_next = _grow(s_next, cap)
                    v = n
                    n += 1
                    lookup[key] = v
                    s_ix[v] = vix
                    s_iy[v] = viy
                    s_th[v] = vth
                    s_k[v] = j
                    s_cost[v] = new
                    s_pred[v] = u
                    s_act[v] = a
                    s_next[v] = layer_head[j]
                    layer_head[j] = v
                    layer_size[j] += 1
                elif new < s_cost[v]:
                    s_cost[v] = new
                    s_pred[v] = u
                    s_act[v] = a
                if j == K - 1 and s_cost[v] <= B and s_cost[v] < best_cost:
                    best_cost = s_cost[v]
                    best_state = v
                    B = best_cost

    return (best_state, best_cost, s_pred[:n].copy(), s_act[:n].copy(), s_ix[:n].copy(),
            s_iy[:n].copy(), s_th[:n].copy(), s_k[:n].copy(), s_cost[:n].copy(),
            layer_size, expanded[:n_exp].copy(), n_edges)


@numba.njit(cache=True)
def _greedy_kernel(pd, dix, diy, end_h, nseg, pts, head_ptr, head_idx, dx, dy, origin_h):
    K = pd.shape[0]
    ix = 0
    iy = 0
    h = origin_h
    i = 0
    B = 0.0
    steps = 0
    while i < K - 1:
        best_a = -1
        best_d = np.inf
        for p in range(head_ptr[h], head_ptr[h + 1]):
            a = head_idx[p]
            d = _edge_score(pd, pts, a, nseg[a], ix * dx, iy * dy, i, K, np.inf)
            if d < best_d or (d == best_d and a < best_a):
                best_d = d
                best_a = a
        if best_a == -1:
            return np.nan, steps
        if best_d > B:
            B = best_d
        ix += dix[best_a]
        iy += diy[best_a]
        h = end_h[best_a]
        i += nseg[best_a]
        steps += 1
    return B, steps


def _pd_array(pd: SampledPath) -> np.ndarray:
    return np.ascontiguousarray(pd.points, dtype=np.float64)


def greedy_bound(pd: SampledPath, cs: ControlSet, origin_heading: int = 0) -> float:
    """Upper bound on the optimal score from greedy per-step action choice."""
    pk = cs.packed
    B, _ = _greedy_kernel(_pd_array(pd), pk.dix, pk.diy, pk.end_h, pk.nseg, pk.pts,
                          pk.head_ptr, pk.head_idx, cs.cfg.dx, cs.cfg.dy, origin_heading)
    if math.isnan(B):
        raise Stuck("no control action applies at a reached heading")
    return float(B)


@dataclass
class ClosestPathResult:
    score: float
    actions: list[ControlAction]
    lattice_path: SampledPath
    states_expanded: int
    edges_evaluated: int = 0
    layer_sizes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    trace: list[dict] | None = None


def closest_path(pd: SampledPath, cs: ControlSet, bound: float | None = None,
                 origin_heading: int = 0, trace: bool = False) -> ClosestPathResult:
    """Lattice path minimizing the score against ``pd`` (which must start at the origin).

    ``bound`` must not be smaller than the optimum; by default the greedy
    bound is used. States whose cost exceeds the (tightening) bound are not
    expanded.
    """
    if bound is None:
        bound = greedy_bound(pd, cs, origin_heading)
    pk = cs.packed
    if len(cs) == 0:
        raise NoPath("empty control set")
    out = _closest_path_kernel(_pd_array(pd), pk.start_h, pk.dix, pk.diy, pk.end_h, pk.nseg,
                               pk.pts, pk.head_ptr, pk.head_idx, cs.cfg.dx, cs.cfg.dy,
                               float(bound), origin_heading)
    (best, best_cost, pred, act, s_ix, s_iy, s_th, s_k, s_cost,
     layer_size, expanded, n_edges) = out
    if best < 0:
        raise NoPath(f"no lattice path within bound {bound:.6g}")
    seq = []
    s = best
    while pred[s] >= 0:
        seq.append(cs.all[act[s]])
        s = pred[s]
    seq.reverse()
    path = concatenate_actions(seq, cs.cfg, cs.delta, start=LatticeVertex(0, 0, origin_heading))
    tr = None
    if trace:
        tr = [
            {"k": int(s_k[e]), "vertex": [int(s_ix[e]), int(s_iy[e]), int(s_th[e])],
             "cost": float(s_cost[e])}
            for e in expanded
        ]
    return ClosestPathResult(float(best_cost), seq, path, int(len(expanded)), int(n_edges),
                             layer_size, tr)


def dump_trace(result: ClosestPathResult, path: str | Path) -> None:
    Path(path).write_text(json.dumps({"score": result.score, "expansions": result.trace}) + "\n")


def brute_force_closest(pd: SampledPath, cs: ControlSet, max_depth: int,
                        node_budget: int = 2_000_000, origin_heading: int = 0) -> float:
    """Exhaustive search over every action sequence of at most ``max_depth`` actions.

    Test oracle: shares nothing with the dynamic program except the scoring
    functions.
    """
    ctx = ScoreContext(pd, cs.delta)
    K = len(pd)
    best = math.inf
    nodes = 0

    def dfs(u: LatticeVertex, i: int, cost: float, depth: int):
        nonlocal best, nodes
        nodes += 1
        if nodes > node_budget:
            raise Explosion(f"more than {node_budget} nodes enumerated")
        if i >= K - 1:
            best = min(best, cost)
            return
        if depth == max_depth:
            return
        for c in cs.by_heading[u.itheta]:
            v, j = apply_control_action(u, c, i)
            d = score_subpath(ctx, c, vertex_pose(u, cs.cfg), i)
            dfs(v, j, max(cost, d), depth + 1)

    dfs(LatticeVertex(0, 0, origin_heading), 0, 0.0, 0)
    if math.isinf(best):
        raise NoPath("no action sequence covers the dataset path")
    return best


def path_score(pd: SampledPath, actions: list[ControlAction], cs: ControlSet) -> float:
    """Score of an explicit action sequence (convenience for tests and reports)."""
    return score_paths(pd, concatenate_actions(actions, cs.cfg, cs.delta))
