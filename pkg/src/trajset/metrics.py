"""Motion-forecasting metrics.

Two minimum conventions coexist here on purpose:

* ``eval_multimodal`` picks, per sequence, the prediction with the smallest
  endpoint error and reports *its* ADE and FDE.
* ``lb_minade`` takes the pure ADE minimum over set members, which is the
  quantity the greedy set generator optimises.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from trajset.core import AgentClass, ade_to_many, as_trajectories, min_turn_radius

MISS_RADIUS = 2.0

FUSION_STAGES = ("pre_fusion", "conditional")


@dataclass
class MetricReport:
    k: int
    min_ade: float
    min_fde: float
    miss_rate: float
    tri: float | None
    n_sequences: int

    def as_dict(self) -> dict:
        return asdict(self)


def _stack_predictions(predictions, k: int) -> np.ndarray:
    preds = [np.asarray(p, dtype=np.float64) for p in predictions]
    for n, p in enumerate(preds):
        if p.ndim != 3 or p.shape[0] < k:
            raise ValueError(f"sequence {n}: expected at least {k} predictions, got shape {p.shape}")
    return np.stack([p[:k] for p in preds])


def eval_multimodal(predictions, ground_truth, k: int, classes=None, last_observed=None) -> MetricReport:
    """minADE / minFDE / MR at ``k`` with endpoint-based mode selection.

    Args:
        predictions: per sequence, ``(>=k, T, 2)`` predictions ranked by
            score; only the first ``k`` are used.
        ground_truth: ``(N, T, 2)``.
        k: number of modes.
        classes, last_observed: optional per-sequence agent class and last
            observed position; when given the report includes TRI.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    gt = as_trajectories(ground_truth, "ground_truth")
    preds = _stack_predictions(predictions, k)
    if preds.shape[0] != gt.shape[0]:
        raise ValueError("one ground truth per sequence required")
    if preds.shape[2:] != gt.shape[1:]:
        raise ValueError(f"horizon mismatch: predictions {preds.shape[2]} vs ground truth {gt.shape[1]}")

    diff = preds - gt[:, None]
    dist = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2)  # (N, k, T)
    fdes = dist[:, :, -1]
    best = np.argmin(fdes, axis=1)
    rows = np.arange(gt.shape[0])
    sel_fde = fdes[rows, best]
    sel_ade = dist[rows, best].mean(axis=1)

    tri_value = None
    if classes is not None:
        tri_value = tri(preds, classes, last_observed)
    return MetricReport(
        k=k,
        min_ade=float(np.mean(sel_ade)),
        min_fde=float(np.mean(sel_fde)),
        miss_rate=100.0 * float(np.mean(sel_fde > MISS_RADIUS)),
        tri=tri_value,
        n_sequences=int(gt.shape[0]),
    )


def is_infeasible(traj, agent_class, last_observed) -> bool:
    threshold = AgentClass(agent_class).turn_radius_threshold
    return min_turn_radius(traj, last_observed) < threshold


def tri(predictions, classes: Sequence, last_observed=None) -> float:
    """Turn-rate infeasibility, percent of all predicted trajectories.

    ``predictions`` is ``(N, k, T, 2)`` (or one ``(k, T, 2)`` array per
    sequence); ``last_observed`` defaults to the local origin.
    """
    if len(classes) != len(predictions):
        raise ValueError("one agent class per sequence required")
    if last_observed is None:
        last_observed = np.zeros((len(predictions), 2))
    total = 0
    bad = 0
    for preds, cls, start in zip(predictions, classes, last_observed):
        for traj in preds:
            total += 1
            bad += is_infeasible(traj, cls, start)
    return 100.0 * bad / total if total else 0.0


def lb_minade(dataset, trajectory_set) -> float:
    """Mean over the dataset of the smallest ADE to any set member."""
    data = as_trajectories(dataset, "dataset")
    members = as_trajectories(getattr(trajectory_set, "trajectories", trajectory_set), "set")
    if members.shape[1] != data.shape[1]:
        raise ValueError(f"horizon mismatch: set {members.shape[1]} vs dataset {data.shape[1]}")
    best = np.full(data.shape[0], np.inf)
    for member in members:
        np.minimum(best, ade_to_many(member, data), out=best)
    return float(np.mean(best))


def rcc(model) -> float:
    """Remaining conditional capacity: percent of parameters after fusion.

    ``model`` exposes ``parameter_blocks()`` yielding ``(name, shape, stage)``
    with ``stage`` one of ``"pre_fusion"`` or ``"conditional"``.
    """
    total = 0
    conditional = 0
    for name, shape, stage in model.parameter_blocks():
        if stage not in FUSION_STAGES:
            raise ValueError(f"parameter block {name!r} has no fusion-stage label")
        n = math.prod(shape)
        total += n
        if stage == "conditional":
            conditional += n
    if total == 0:
        raise ValueError("model has no parameters")
    return 100.0 * conditional / total
