"""Sparsity-regularized control-set objective and the greedy learner."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .closest_path import closest_path, greedy_bound
from .clustering import ClusterModel
from .errors import MissingStraight
from .geometry import SampledPath
from .lattice import ControlAction, ControlSet, LatticeConfig


@dataclass(frozen=True)
class ObjectiveParams:
    lam: float
    dense_size: int

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.dense_size < 1:
            raise ValueError("dense_size must be positive")


@dataclass(frozen=True)
class LearnerConfig:
    paths_per_round: int = 8
    candidates_per_round: int = 32
    no_improve_rounds: int = 3
    seed: int = 0
    initial_weight: float = 5.0
    weight_alpha: float = 0.5
    max_rounds: int = 100_000

    def __post_init__(self):
        for name in ("paths_per_round", "candidates_per_round", "no_improve_rounds", "max_rounds"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not 0.0 <= self.weight_alpha <= 1.0:
            raise ValueError("weight_alpha must lie in [0, 1]")


@dataclass
class LearnerState:
    learned: ControlSet
    weights: np.ndarray
    history: list[tuple] = field(default_factory=list)
    matching: float = float("nan")
    objective: float = float("nan")
    # objective of the unchanged set on each round's sample, for auditing acceptance
    round_baselines: list[float] = field(default_factory=list)


def path_scores(chat: ControlSet, paths: list[SampledPath],
                bounds: list[float] | None = None) -> np.ndarray:
    """Closest-path score of every path; ``bounds`` may give known upper bounds."""
    out = np.empty(len(paths))
    for n, pd in enumerate(paths):
        b = greedy_bound(pd, chat)
        if bounds is not None:
            b = min(b, bounds[n])
        out[n] = closest_path(pd, chat, b).score
    return out


def matching_term(chat: ControlSet, paths: list[SampledPath]) -> float:
    return float(np.mean(path_scores(chat, paths)))


def objective(chat: ControlSet, paths: list[SampledPath], params: ObjectiveParams) -> float:
    """Mean closest-path score plus ``lam * |chat| / |C|``."""
    return matching_term(chat, paths) + params.lam * len(chat) / params.dense_size


def init_control_set(cfg: LatticeConfig, dense: ControlSet) -> ControlSet:
    """The shortest straight action of every heading."""
    picks = []
    for h in range(cfg.n_headings):
        straights = [a for a in dense.by_heading[h] if a.is_straight]
        if not straights:
            raise MissingStraight(f"heading {h} has no straight action")
        picks.append(min(straights, key=lambda a: (a.arc_length, dense.index(a))))
    return ControlSet(picks, dense.cfg, dense.delta)


def learn_control_set(clusters: ClusterModel, dense: ControlSet, params: ObjectiveParams,
                      cfg: LearnerConfig = LearnerConfig(), log=None, jobs: int = 1) -> LearnerState:
    """Greedily grow a sparse subset of ``dense`` guided by cluster weights.

    Every round draws its randomness from a generator keyed on (seed, round),
    so runs that differ only in ``lam`` see the same samples while their
    learned sets agree. Candidates are scored independently (in a thread
    pool when ``jobs > 1``) and reduced in action-index order, so the result
    does not depend on ``jobs``.
    """
    chat = init_control_set(dense.cfg, dense)
    k = clusters.k
    weights = np.full(k, float(cfg.initial_weight))
    members = [clusters.members(c) for c in range(k)]
    paths = clusters.paths
    history: list[tuple] = []
    baselines: list[float] = []
    stale = 0
    n_dense = len(dense)

    for rnd in range(cfg.max_rounds):
        rng = np.random.default_rng([cfg.seed, rnd])
        probs = weights / weights.sum()
        cluster = int(rng.choice(k, p=probs))
        pool = members[cluster]
        take = min(cfg.paths_per_round, len(pool))
        sample_idx = sorted(rng.choice(len(pool), size=take, replace=False).tolist())
        sample = [paths[pool[i]] for i in sample_idx]

        order = rng.permutation(n_dense)
        cands = [dense.all[i] for i in order if dense.all[i] not in chat]
        cands = sorted(cands[: cfg.candidates_per_round], key=dense.index)

        base_scores = path_scores(chat, sample)
        penalty = params.lam / params.dense_size
        base = float(base_scores.mean()) + penalty * len(chat)

        def evaluate(c):
            trial = chat.with_actions([c])
            # adding an action never worsens a path, so the old score bounds the new one
            sc = path_scores(trial, sample, bounds=base_scores.tolist())
            return float(sc.mean()) + penalty * len(trial), sc

        if jobs > 1 and len(cands) > 1:
            with ThreadPoolExecutor(jobs) as pool:
                evaluated = list(pool.map(evaluate, cands))
        else:
            evaluated = [evaluate(c) for c in cands]

        best_val, best_c, best_scores = base, None, base_scores
        for c, (val, sc) in zip(cands, evaluated):
            if val < best_val:
                best_val, best_c, best_scores = val, c, sc

        if best_c is not None:
            chat = chat.with_actions([best_c])
            stale = 0
        else:
            stale += 1
        a = cfg.weight_alpha
        weights[cluster] = max((1 - a) * weights[cluster] + a * float(best_scores.mean()), 1e-12)
        history.append((rnd, best_val, len(chat), cluster))
        baselines.append(base)
        if log is not None:
            log(f"round {rnd}: cluster {cluster} objective {best_val:.6f} |C|={len(chat)}")
        if stale >= cfg.no_improve_rounds:
            break

    state = LearnerState(chat, weights, history, round_baselines=baselines)
    state.matching = matching_term(chat, paths)
    state.objective = state.matching + params.lam * len(chat) / params.dense_size
    return state


def write_history_csv(state: LearnerState, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "objective", "set_size", "cluster"])
        for it, obj, size, cl in state.history:
            w.writerow([it, repr(float(obj)), size, cl])


def learner_manifest(params: ObjectiveParams, cfg: LearnerConfig, state: LearnerState) -> dict:
    return {
        "lambda": params.lam,
        "dense_size": params.dense_size,
        "learner": asdict(cfg),
        "learned_size": len(state.learned),
        "matching": state.matching,
        "objective": state.objective,
        "rounds": len(state.history),
    }
