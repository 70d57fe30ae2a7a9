import json
import math

import numpy as np
import pytest

from sparselattice.closest_path import (brute_force_closest, closest_path, dump_trace, greedy_bound,
                                        path_score)
from sparselattice.errors import Explosion, NoPath
from sparselattice.geometry import SampledPath
from sparselattice.lattice import ControlSet, LatticeVertex, apply_control_action, concatenate_actions

from instances import DELTA, FOUR, hermite_action, random_instance


def test_exact_concatenation_recovered():
    acts = [hermite_action(h, 1, 0, 0) for h in range(4)] + [hermite_action(0, 2, 1, 1),
                                                             hermite_action(1, 2, -1, -1)]
    cs = ControlSet(acts, FOUR, DELTA)
    seq = [acts[0], acts[4], acts[5]]
    pd = concatenate_actions(seq, FOUR, DELTA)
    res = closest_path(pd, cs)
    assert res.score == pytest.approx(0.0, abs=1e-12)
    assert [a.key for a in res.actions] == [a.key for a in seq]
    assert greedy_bound(pd, cs) == pytest.approx(0.0, abs=1e-12)


def test_single_straight_set():
    cs = ControlSet([hermite_action(h, 1, 0, 0) for h in range(4)], FOUR, DELTA)
    pd = SampledPath(np.column_stack([np.arange(9) * DELTA, np.zeros(9)]), DELTA)
    assert greedy_bound(pd, cs) == pytest.approx(0.0, abs=1e-12)
    assert brute_force_closest(pd, cs, 8) == pytest.approx(0.0, abs=1e-12)
    bent = SampledPath(np.column_stack([np.arange(9) * DELTA, np.arange(9) * 0.05]), DELTA)
    d = brute_force_closest(bent, cs, 8)
    assert d == pytest.approx(0.4, abs=1e-12)
    assert closest_path(bent, cs).score == pytest.approx(d, abs=1e-12)


@pytest.mark.parametrize("seed", range(40))
def test_matches_brute_force(seed):
    pd, cs = random_instance(seed)
    bf = brute_force_closest(pd, cs, len(pd))
    B = greedy_bound(pd, cs)
    assert B >= bf - 1e-12
    res = closest_path(pd, cs, B)
    assert res.score == pytest.approx(bf, abs=1e-9)
    assert path_score(pd, res.actions, cs) == pytest.approx(res.score, abs=1e-12)
    inf = closest_path(pd, cs, math.inf)
    assert inf.score == pytest.approx(bf, abs=1e-9)
    assert res.states_expanded <= inf.states_expanded


def test_layer_bound_and_monotone_layers():
    pd, cs = random_instance(7)
    res = closest_path(pd, cs, trace=True)
    B = greedy_bound(pd, cs)
    # lattice positions within B of one sample, times headings
    cap = (math.floor(2 * B / FOUR.dx) + 1) * (math.floor(2 * B / FOUR.dy) + 1) * FOUR.n_headings
    assert np.all(res.layer_sizes <= cap)
    ks = [t["k"] for t in res.trace]
    assert ks == sorted(ks)


def test_nopath_below_optimum():
    pd, cs = random_instance(3)
    d = closest_path(pd, cs).score
    if d > 0:
        with pytest.raises(NoPath):
            closest_path(pd, cs, d * 0.5)


def test_brute_force_guards():
    pd, cs = random_instance(1)
    with pytest.raises(Explosion):
        brute_force_closest(pd, cs, len(pd), node_budget=3)
    empty_heading = ControlSet([hermite_action(1, 1, 0, 0)], FOUR, DELTA)
    with pytest.raises(NoPath):
        brute_force_closest(pd, empty_heading, 5)


def test_trace_dump(tmp_path):
    pd, cs = random_instance(2)
    res = closest_path(pd, cs, trace=True)
    f = tmp_path / "trace.json"
    dump_trace(res, f)
    data = json.loads(f.read_text())
    assert len(data["expansions"]) == res.states_expanded


def test_deterministic():
    pd, cs = random_instance(11)
    a, b = closest_path(pd, cs, trace=True), closest_path(pd, cs, trace=True)
    assert a.trace == b.trace and [x.key for x in a.actions] == [x.key for x in b.actions]


def test_dense_set_against_greedy(dense):
    rng = np.random.default_rng(0)
    u, k, seq = LatticeVertex(0, 0, 0), 0, []
    while k < 100:
        fam = dense.by_heading[u.itheta]
        a = fam[int(rng.integers(len(fam)))]
        seq.append(a)
        u, k = apply_control_action(u, a, k)
    base = concatenate_actions(seq, dense.cfg, dense.delta).points[:101]
    pd = SampledPath(base + np.r_[[[0, 0]], rng.normal(0, 0.05, (100, 2))], dense.delta)
    res = closest_path(pd, dense)
    assert res.score <= greedy_bound(pd, dense) + 1e-12
    assert res.score <= path_score(pd, seq, dense) + 1e-12
