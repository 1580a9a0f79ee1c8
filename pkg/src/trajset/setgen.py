"""Trajectory-set construction.

``generate_set_metric_driven`` grows a set one trajectory at a time, always
adding the dataset member that minimises the mean (over the dataset) of the
best pairwise error to the set.  It is an exact greedy: scores are the
literal ``mean(min(M_full[i], M_set))`` values, and candidates are skipped
only when a submodularity bound proves they cannot win (see ``_LazyQueue``).

``generate_set_bagging`` is the fixed-set cover baseline with a max-pointwise
tolerance.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from trajset.core import (
    FRAME_CONVENTION,
    AgentClass,
    ClassGroup,
    as_trajectories,
)

log = logging.getLogger(__name__)

DEFAULT_MATRIX_THRESHOLD = 20_000
PAIR_METRICS = ("ade", "fde")
# scores this close count as equal and go to the lowest index
TIE_RTOL = 1e-12


def tie_tolerance(m: float) -> float:
    return TIE_RTOL * max(1.0, abs(m))


@dataclass
class TrajectorySet:
    """Ordered candidate futures used as classification targets."""

    trajectories: np.ndarray
    dt: float = 0.1
    class_group: ClassGroup = ClassGroup.MIXED
    frame: str = FRAME_CONVENTION
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.trajectories = as_trajectories(self.trajectories, "set trajectories")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def __len__(self) -> int:
        return self.trajectories.shape[0]

    def __getitem__(self, i):
        return self.trajectories[i]

    @property
    def horizon(self) -> int:
        return self.trajectories.shape[1]

    @property
    def endpoints(self) -> np.ndarray:
        return self.trajectories[:, -1]


@dataclass
class GenerationTrace:
    """Selection order and the achievable mean error after each pick."""

    selected: list[int] = field(default_factory=list)
    achievable: list[float] = field(default_factory=list)
    memory_strategy: str = "matrix"
    evaluations: int = 0

    def record(self, index: int, value: float) -> None:
        self.selected.append(int(index))
        self.achievable.append(float(value))


def pairwise_rows(data: np.ndarray, rows, metric: str = "ade") -> np.ndarray:
    """Pairwise error between ``data[rows]`` and every member of ``data``.

    Accumulates over timesteps so the working set stays ``len(rows) * k``.
    """
    block = data[rows]
    if metric == "fde":
        d = block[:, None, -1, :] - data[None, :, -1, :]
        return np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)
    if metric != "ade":
        raise ValueError(f"unknown metric {metric!r}, expected one of {PAIR_METRICS}")
    n_t = data.shape[1]
    xs = np.ascontiguousarray(data[:, :, 0].T)
    ys = np.ascontiguousarray(data[:, :, 1].T)
    acc = np.zeros((block.shape[0], data.shape[0]))
    for t in range(n_t):
        dx = block[:, t, 0, None] - xs[t][None]
        dy = block[:, t, 1, None] - ys[t][None]
        np.multiply(dx, dx, out=dx)
        np.multiply(dy, dy, out=dy)
        dx += dy
        np.sqrt(dx, out=dx)
        acc += dx
    acc /= n_t
    return acc


def pairwise_matrix(data, metric: str = "ade", dtype=np.float64, block_rows: int = 64) -> np.ndarray:
    """Full ``k x k`` pairwise error matrix (``M_full``)."""
    data = as_trajectories(data, "dataset")
    k = data.shape[0]
    out = np.empty((k, k), dtype=dtype)
    for r0 in range(0, k, block_rows):
        out[r0:r0 + block_rows] = pairwise_rows(data, slice(r0, r0 + block_rows), metric)
    return out


class _Rows:
    """Row access to ``M_full``, either materialised or recomputed on demand."""

    def __init__(self, data, metric, materialize, dtype, block_rows):
        self.data = data
        self.metric = metric
        self.block_rows = block_rows
        self.matrix = pairwise_matrix(data, metric, dtype, block_rows) if materialize else None

    def row(self, i: int) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix[i].astype(np.float64, copy=False)
        return pairwise_rows(self.data, slice(i, i + 1), self.metric)[0]

    def blocks(self):
        k = self.data.shape[0]
        for r0 in range(0, k, self.block_rows):
            sl = slice(r0, min(k, r0 + self.block_rows))
            if self.matrix is not None:
                yield sl, self.matrix[sl].astype(np.float64, copy=False)
            else:
                yield sl, pairwise_rows(self.data, sl, self.metric)


def count_distinct(data: np.ndarray) -> int:
    return int(np.unique(data.reshape(data.shape[0], -1), axis=0).shape[0])


def _score(row: np.ndarray, m_set: np.ndarray) -> float:
    return float(np.mean(np.minimum(row, m_set)))


class _LazyQueue:
    """Max-heap of stale gains ``mean(M_set) - m_i``.

    The true gain of a candidate can only shrink as ``M_set`` shrinks, so a
    stale gain ``g`` bounds the current score from below by
    ``mean(M_set) - g``.  ``slack`` absorbs floating-point rounding in both
    means.
    """

    def __init__(self):
        self.heap: list[tuple[float, int]] = []

    def push(self, gain: float, index: int) -> None:
        heapq.heappush(self.heap, (-gain, index))

    def pop(self) -> tuple[float, int]:
        g, i = heapq.heappop(self.heap)
        return -g, i

    def peek_gain(self) -> float:
        return -self.heap[0][0]

    def __bool__(self) -> bool:
        return bool(self.heap)


def generate_set_metric_driven(
    dataset,
    s: int,
    *,
    metric: str = "ade",
    matrix_threshold: int = DEFAULT_MATRIX_THRESHOLD,
    storage_dtype=np.float64,
    lazy: bool = True,
    block_rows: int = 64,
    dt: float = 0.1,
    class_group: ClassGroup = ClassGroup.MIXED,
    meta: dict | None = None,
) -> tuple[TrajectorySet, GenerationTrace]:
    """Greedy metric-driven set generation.

    Args:
        dataset: ``(k, T, 2)`` future trajectories in a common local frame.
        s: number of trajectories to select.
        metric: pairwise error driving the selection, ``"ade"`` or ``"fde"``.
        matrix_threshold: materialise ``M_full`` when ``k`` is at most this,
            otherwise recompute rows on demand.
        storage_dtype: dtype of the materialised matrix; sums are float64.
        lazy: skip candidates whose bound rules them out.  ``False``
            rescans every candidate each iteration; both give the same set.

    Returns:
        The set in selection order and the generation trace.

    Raises:
        ValueError: ``s`` exceeds the number of distinct trajectories.
    """
    data = as_trajectories(dataset, "dataset")
    k = data.shape[0]
    if s < 1:
        raise ValueError("set size must be >= 1")
    distinct = count_distinct(data)
    if s > distinct:
        raise ValueError(f"set size {s} exceeds the {distinct} distinct trajectories in the dataset")

    materialize = k <= matrix_threshold
    rows = _Rows(data, metric, materialize, storage_dtype, block_rows)
    trace = GenerationTrace(memory_strategy="matrix" if materialize else "streaming")
    log.debug("set generation k=%d s=%d strategy=%s", k, s, trace.memory_strategy)

    m_set = np.full(k, np.inf)
    available = np.ones(k, dtype=bool)
    queue = _LazyQueue()

    def select(i: int, m_i: float, row: np.ndarray) -> None:
        nonlocal m_set
        m_set = np.minimum(row, m_set)
        trace.record(i, m_i)
        # exact copies would only repeat a member
        available[row == 0.0] = False
        available[i] = False

    def pick(scores: dict[int, float]) -> int:
        best = min(scores.values())
        return min(i for i, m in scores.items() if m <= best + tie_tolerance(best))

    def full_scan(with_gains: bool) -> None:
        cur = float(np.mean(m_set))
        scores = {}
        for sl, block in rows.blocks():
            block_scores = np.minimum(block, m_set).mean(axis=1)
            trace.evaluations += block.shape[0]
            for off, m in enumerate(block_scores.tolist()):
                i = sl.start + off
                if available[i]:
                    scores[i] = m
                    if with_gains:
                        queue.push(cur - m, i)
        i = pick(scores)
        select(i, scores[i], rows.row(i))

    while len(trace.selected) < s:
        it = len(trace.selected)
        if not lazy or it == 0:
            full_scan(with_gains=False)
            continue
        if it == 1:
            full_scan(with_gains=True)
            continue
        cur = float(np.mean(m_set))
        slack = 1e-9 * max(1.0, abs(cur))
        best_m = math.inf
        scores: dict[int, float] = {}
        cached: dict[int, np.ndarray] = {}
        while queue:
            if cur - queue.peek_gain() - slack > best_m + tie_tolerance(best_m):
                break
            _, i = queue.pop()
            if not available[i]:
                continue
            row = rows.row(i)
            m = _score(row, m_set)
            trace.evaluations += 1
            scores[i] = m
            cached[i] = row
            best_m = min(best_m, m)
        best_i = pick(scores)
        for i, m in scores.items():
            if i != best_i:
                queue.push(cur - m, i)
        select(best_i, scores[best_i], cached[best_i])

    params = {"metric": metric, "s": s, "k": k, "memory_strategy": trace.memory_strategy}
    out_meta = {"algorithm": "metric_driven", "params": params,
                "selected": list(trace.selected), "achievable": list(trace.achievable)}
    out_meta.update(meta or {})
    tset = TrajectorySet(data[trace.selected].copy(), dt=dt, class_group=class_group, meta=out_meta)
    return tset, trace


def max_pointwise_distance(a: np.ndarray, many: np.ndarray) -> np.ndarray:
    d = many - a[None]
    return np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2).max(axis=1)


def generate_set_bagging(dataset, epsilon: float, *, dt: float = 0.1,
                         class_group: ClassGroup = ClassGroup.MIXED) -> TrajectorySet:
    """Greedy cover: repeatedly keep the trajectory covering most uncovered ones.

    ``a`` covers ``b`` when their max pointwise distance is at most
    ``epsilon``.  Ties go to the lowest dataset index.
    """
    data = as_trajectories(dataset, "dataset")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    k = data.shape[0]
    covers = np.empty((k, k), dtype=bool)
    for i in range(k):
        covers[i] = max_pointwise_distance(data[i], data) <= epsilon
    uncovered = np.ones(k, dtype=bool)
    chosen: list[int] = []
    while uncovered.any():
        counts = covers[:, uncovered].sum(axis=1)
        i = int(np.argmax(counts))
        chosen.append(i)
        uncovered &= ~covers[i]
    meta = {"algorithm": "bagging", "params": {"epsilon": epsilon, "k": k}, "selected": chosen}
    return TrajectorySet(data[chosen].copy(), dt=dt, class_group=class_group, meta=meta)


def generate_class_specific(
    futures,
    classes: Sequence[AgentClass],
    s_per_group: int | dict,
    groups: Sequence[ClassGroup] = (ClassGroup.NON_VULNERABLE, ClassGroup.VULNERABLE),
    **opts,
) -> dict[ClassGroup, TrajectorySet]:
    """Run the metric-driven generation separately for each class group.

    Raises:
        ValueError: a requested group has no trajectories.
    """
    data = as_trajectories(futures, "futures")
    if len(classes) != data.shape[0]:
        raise ValueError("one class label per trajectory required")
    member_groups = np.array([AgentClass(c).group.value for c in classes])
    out = {}
    for group in groups:
        mask = member_groups == group.value
        if not mask.any():
            raise ValueError(f"class group {group.value!r} has no trajectories")
        size = s_per_group[group] if isinstance(s_per_group, dict) else s_per_group
        tset, _ = generate_set_metric_driven(data[mask], size, class_group=group, **opts)
        out[group] = tset
    return out


def subsample(dataset, n: int, seed: int):
    """Uniform sample of ``n`` items without replacement, deterministic in ``seed``."""
    size = len(dataset)
    if n > size:
        raise ValueError(f"cannot sample {n} items from a dataset of {size}")
    idx = np.random.default_rng(seed).choice(size, size=n, replace=False)
    if isinstance(dataset, np.ndarray):
        return dataset[idx]
    return [dataset[i] for i in idx]
