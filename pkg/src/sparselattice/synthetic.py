"""Planted-subset datasets: demonstration paths drawn from a known control set."""

from __future__ import annotations

import math

import numpy as np

from .geometry import SampledPath
from .lattice import ControlSet, LatticeConfig, LatticeVertex, apply_control_action, concatenate_actions
from .optimizer import init_control_set
from .spiral import DenseSetConfig, generate_dense_control_set


def planted_lattice() -> LatticeConfig:
    return LatticeConfig(0.4, 0.4, tuple(k * math.pi / 4 for k in range(8)))


def planted_dense_set(per_heading: int = 15, seed: int = 0) -> ControlSet:
    """A dense set with ``per_heading`` actions for each of 8 headings.

    Always contains the shortest straight action of every heading.
    """
    cfg = DenseSetConfig((0.4, 2.4), (-1.2, 1.2), (0.0, math.pi / 4), planted_lattice(), 1.0, 0.1)
    full = generate_dense_control_set(cfg)
    init = init_control_set(full.cfg, full)
    rng = np.random.default_rng(seed)
    keep = []
    for h in range(full.cfg.n_headings):
        fam = full.by_heading[h]
        base = [a for a in init.by_heading[h]]
        rest = [a for a in fam if a not in init]
        pick = rng.choice(len(rest), size=min(per_heading - len(base), len(rest)), replace=False)
        keep.extend(base + [rest[i] for i in sorted(pick)])
    return ControlSet(keep, full.cfg, full.delta)


def planted_subset(dense: ControlSet, size: int = 20, seed: int = 0) -> ControlSet:
    """Initialization actions plus ``size - |init|`` random others."""
    init = init_control_set(dense.cfg, dense)
    rest = [a for a in dense.all if a not in init]
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(rest), size=size - len(init), replace=False)
    return ControlSet([*init.all, *(rest[i] for i in sorted(pick))], dense.cfg, dense.delta)


def random_walk_paths(cs: ControlSet, n: int, n_points: int, seed: int = 0) -> list[SampledPath]:
    """``n`` paths from the origin (heading 0), each a random chain of actions of ``cs``
    truncated to ``n_points`` points."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        u, k, seq = LatticeVertex(0, 0, 0), 0, []
        while k < n_points - 1:
            fam = cs.by_heading[u.itheta]
            a = fam[int(rng.integers(len(fam)))]
            seq.append(a)
            u, k = apply_control_action(u, a, k)
        out.append(concatenate_actions(seq, cs.cfg, cs.delta).truncated(n_points))
    return out
