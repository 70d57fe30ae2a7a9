"""The arc-length-locked path scoring measure.

Both paths are compared point by point at equal arc length, and only over the
length of the dataset path. The measure is not symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooShort
from .geometry import Pose2D, SampledPath
from .lattice import ControlAction


@dataclass(frozen=True)
class ScoreContext:
    dataset_path: SampledPath
    delta: float

    def __post_init__(self):
        if len(self.dataset_path) < 2:
            raise ValueError("dataset path needs at least 2 points")

    @property
    def K(self) -> int:
        return len(self.dataset_path)


def score_paths(pd: SampledPath, pl: SampledPath) -> float:
    """Max distance between the k-th points of ``pd`` and ``pl`` for k < len(pd)."""
    K = len(pd)
    if len(pl) < K:
        raise TooShort(f"lattice path has {len(pl)} points, need at least {K}")
    diff = pd.points - pl.points[:K]
    return float(np.max(np.hypot(diff[:, 0], diff[:, 1])))


def score_subpath(ctx: ScoreContext, c: ControlAction, start_vertex_pose: Pose2D,
                  k1: int, k2: int | None = None) -> float:
    """Score of action ``c`` placed at ``start_vertex_pose`` against points k1..k2.

    Action points that fall past the end of the dataset path are not compared.
    """
    pd = ctx.dataset_path.points
    K = len(pd)
    if k1 >= K or k1 < 0:
        raise IndexError(f"k1={k1} outside dataset path of {K} points")
    if k2 is None:
        k2 = k1 + c.n_segments
    elif k2 != k1 + c.n_segments:
        raise ValueError("k2 must equal k1 + n_segments")
    stop = min(k2, K - 1)
    m = stop - k1 + 1
    placed = c.path.points[:m] + (start_vertex_pose.x, start_vertex_pose.y)
    diff = pd[k1 : stop + 1] - placed
    return float(np.max(np.hypot(diff[:, 0], diff[:, 1])))


def compared_pairs(K: int, k1: int, n_segments: int) -> int:
    """How many point pairs :func:`score_subpath` compares."""
    return min(k1 + n_segments, K - 1) - k1 + 1
