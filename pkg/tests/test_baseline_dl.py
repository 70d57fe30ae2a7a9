import pytest

from sparselattice.baseline_dl import reachable_vertices, reduce_control_set_dl
from sparselattice.lattice import ControlSet, LatticeConfig

from conftest import straight_action


def test_straight_family_factor_one():
    cfg = LatticeConfig()
    acts = [straight_action(h, n, cfg, 0.1) for h in (0, 4, 8, 12) for n in range(1, 11)]
    red = reduce_control_set_dl(ControlSet(acts, cfg, 0.1), 1.0)
    assert sorted((a.start_heading, a.delta_ix, a.delta_iy) for a in red) == [
        (0, 1, 0), (4, 0, 1), (8, -1, 0), (12, 0, -1)]


def test_factor_validation(dense):
    with pytest.raises(ValueError):
        reduce_control_set_dl(dense, 0.9)


def test_dense_reduction(dense, dl):
    assert len(dl) < len(dense)
    assert set(dl.keys()) <= set(dense.keys())
    for h in range(16):
        straights = [a for a in dense.by_heading[h] if a.is_straight]
        shortest = min(straights, key=lambda a: a.arc_length)
        assert shortest in dl


def test_large_factor_keeps_reachability(dense, dl):
    # a looser factor can only discard more
    red = reduce_control_set_dl(dense, 3.0)
    assert len(red) <= len(dl)
    for h in (0, 1):
        assert (reachable_vertices(red, h, 10, 20) == reachable_vertices(dense, h, 10, 20)).all()
