"""K-means over fixed-length path slices with the pointwise Euclidean norm."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, SchemaError
from .geometry import SampledPath


def path_distance(p1: SampledPath, p2: SampledPath) -> float:
    """Root-mean-square distance between corresponding points."""
    if len(p1) != len(p2):
        raise LengthMismatch(f"{len(p1)} vs {len(p2)} points")
    d = p1.points - p2.points
    return float(np.sqrt(np.mean(np.sum(d * d, axis=1))))


@dataclass
class ClusterModel:
    means: list[SampledPath]
    assignments: np.ndarray
    inertia: float
    paths: list[SampledPath] = field(repr=False, default_factory=list)
    inertia_history: list[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def k(self) -> int:
        return len(self.means)

    def members(self, cluster: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.assignments == cluster)]

    def distances_to_mean(self) -> np.ndarray:
        return np.array([path_distance(p, self.means[c]) for p, c in zip(self.paths, self.assignments)])


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # mean squared point distance, i.e. path_distance squared, for all pairs
    K = X.shape[1] // 2
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2) / K


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [int(rng.integers(len(X)))]
    d2 = _sq_dists(X, X[centers])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            rest = np.setdiff1d(np.arange(len(X)), centers)
            centers.append(int(rest[0]))
        else:
            centers.append(int(rng.choice(len(X), p=d2 / total)))
        d2 = np.minimum(d2, _sq_dists(X, X[centers[-1:]])[:, 0])
    return X[centers].copy()


def kmeans_paths(paths: list[SampledPath], k: int = 8, max_iter: int = 100,
                 seed: int = 0) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding.

    Seeding runs on a canonical (content-sorted) ordering of the paths, so the
    resulting partition does not depend on input order.
    """
    if not paths:
        raise ValueError("no paths to cluster")
    if k > len(paths):
        raise ValueError("k exceeds the number of paths")
    n_pts = {len(p) for p in paths}
    if len(n_pts) != 1:
        raise LengthMismatch("all paths must have the same number of points")
    X = np.stack([p.points.ravel() for p in paths])
    canon = np.lexsort(X.T[::-1])
    Xc = X[canon]
    rng = np.random.default_rng(seed)
    C = _kmeanspp(Xc, k, rng)

    history = []
    labels = None
    it = 0
    for it in range(1, max_iter + 1):
        D = _sq_dists(Xc, C)
        new = np.argmin(D, axis=1)
        # keep every cluster populated: move the worst-fit point into each empty one
        for c in range(k):
            if not np.any(new == c):
                resid = D[np.arange(len(Xc)), new]
                resid[np.bincount(new, minlength=k)[new] < 2] = -1.0
                far = int(np.argmax(resid))
                new[far] = c
                C[c] = Xc[far]
                D = _sq_dists(Xc, C)
        inertia_assign = float(D[np.arange(len(Xc)), new].sum())
        history.append(inertia_assign)
        converged = labels is not None and np.array_equal(new, labels)
        labels = new
        for c in range(k):
            C[c] = Xc[labels == c].mean(axis=0)
        inertia = float(_sq_dists(Xc, C)[np.arange(len(Xc)), labels].sum())
        history.append(inertia)
        if converged:
            break

    assignments = np.empty(len(paths), dtype=np.int64)
    assignments[canon] = labels
    delta = paths[0].delta
    means = [SampledPath(C[c].reshape(-1, 2), delta) for c in range(k)]
    return ClusterModel(means, assignments, history[-1], list(paths), history, it)


def write_cluster_report(model: ClusterModel, path_ids: list[str], path: str | Path) -> None:
    dists = model.distances_to_mean()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_id", "cluster", "distance_to_mean"])
        for pid, c, d in zip(path_ids, model.assignments, dists):
            w.writerow([pid, int(c), repr(float(d))])


def cluster_model_to_dict(model: ClusterModel, path_ids: list[str] | None = None,
                          seed: int | None = None) -> dict:
    delta = model.means[0].delta
    return {
        "k": model.k,
        "seed": seed,
        "delta": delta,
        "inertia": model.inertia,
        "inertia_history": list(model.inertia_history),
        "n_iter": model.n_iter,
        "means": [m.points.tolist() for m in model.means],
        "assignments": [int(a) for a in model.assignments],
        "path_ids": list(path_ids) if path_ids is not None else None,
        "paths": [p.points.tolist() for p in model.paths],
    }


def cluster_model_from_dict(d: dict) -> ClusterModel:
    try:
        delta = float(d["delta"])
        means = [SampledPath(np.array(m, dtype=float), delta) for m in d["means"]]
        paths = [SampledPath(np.array(p, dtype=float), delta) for p in d["paths"]]
        model = ClusterModel(means, np.array(d["assignments"], dtype=np.int64), float(d["inertia"]),
                             paths, [float(v) for v in d["inertia_history"]], int(d["n_iter"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid cluster file: {exc}") from None
    if len(model.assignments) != len(paths):
        raise SchemaError("invalid cluster file: assignments and paths differ in length")
    return model


def save_cluster_model(model: ClusterModel, path: str | Path, path_ids=None, seed=None) -> None:
    Path(path).write_text(json.dumps(cluster_model_to_dict(model, path_ids, seed)) + "\n")


def load_cluster_model(path: str | Path) -> ClusterModel:
    return cluster_model_from_dict(json.loads(Path(path).read_text()))
