"""Endpoint-radius non-maximum suppression over a scored trajectory set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from trajset.setgen import TrajectorySet

DEFAULT_R_NMS = 1.8


@dataclass
class ScoredSet:
    set: TrajectorySet
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (len(self.set),):
            raise ValueError(f"expected {len(self.set)} probabilities, got {self.probs.shape}")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-6:
            raise ValueError("probabilities must be non-negative and sum to 1")


def nms_indices(endpoints: np.ndarray, probs: np.ndarray, k: int, r_nms: float = DEFAULT_R_NMS) -> list[int]:
    """Indices picked by greedy endpoint NMS, in descending probability.

    A candidate is suppressed when its endpoint lies within ``r_nms``
    (inclusive) of an already picked endpoint; ``r_nms == 0`` disables
    suppression, so coincident endpoints survive.  If fewer than ``k`` survive,
    the best suppressed candidates fill the remaining slots.
    """
    n = len(probs)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds set size {n}")
    if r_nms < 0:
        raise ValueError("r_nms must be non-negative")
    # stable sort on -p: equal probabilities keep the lower index first
    order = np.argsort(-np.asarray(probs), kind="stable")
    if r_nms == 0:
        return [int(i) for i in order[:k]]
    picked: list[int] = []
    suppressed: list[int] = []
    ends = np.asarray(endpoints, dtype=np.float64)
    for i in order:
        if len(picked) == k:
            break
        if picked:
            d = np.sqrt(((ends[picked] - ends[i]) ** 2).sum(axis=1))
            if np.any(d <= r_nms):
                suppressed.append(int(i))
                continue
        picked.append(int(i))
    if len(picked) < k:
        picked.extend(suppressed[: k - len(picked)])
        picked.sort(key=lambda i: (-probs[i], i))
    return picked


def select_nms(scored: ScoredSet, k: int, r_nms: float = DEFAULT_R_NMS) -> list[tuple[np.ndarray, float]]:
    idx = nms_indices(scored.set.endpoints, scored.probs, k, r_nms)
    return [(scored.set[i], float(scored.probs[i])) for i in idx]
