"""Trajectory geometry: agent classes, local frames, displacement errors and
turn-radius estimation.

Trajectories are plain ``float64`` arrays of shape ``(T, 2)`` holding metric
``(x, y)`` positions; batches of trajectories are ``(N, T, 2)``.  The step
duration travels with the containers (sets, datasets), not with each array.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

FRAME_CONVENTION = "local-origin-last-observed-heading-+x"

HEADING_MIN_DISPLACEMENT = 1e-2
DUPLICATE_CHORD = 1e-3
DEGENERATE_AREA = 1e-12


class AgentClass(enum.Enum):
    VEHICLE = "vehicle"
    BUS = "bus"
    MOTORCYCLIST = "motorcyclist"
    CYCLIST = "cyclist"
    PEDESTRIAN = "pedestrian"

    @property
    def group(self) -> "ClassGroup":
        return CLASS_GROUPS[self]

    @property
    def turn_radius_threshold(self) -> float:
        return TURN_RADIUS_THRESHOLDS[self]

    @property
    def index(self) -> int:
        return _CLASS_ORDER.index(self)


class ClassGroup(enum.Enum):
    NON_VULNERABLE = "non_vulnerable"
    VULNERABLE = "vulnerable"
    MIXED = "mixed"


_CLASS_ORDER = list(AgentClass)

CLASS_GROUPS = {
    AgentClass.VEHICLE: ClassGroup.NON_VULNERABLE,
    AgentClass.BUS: ClassGroup.NON_VULNERABLE,
    AgentClass.MOTORCYCLIST: ClassGroup.NON_VULNERABLE,
    AgentClass.CYCLIST: ClassGroup.VULNERABLE,
    AgentClass.PEDESTRIAN: ClassGroup.VULNERABLE,
}

# Minimum feasible turn radius per class, meters.
TURN_RADIUS_THRESHOLDS = {
    AgentClass.VEHICLE: 1.8,
    AgentClass.BUS: 3.0,
    AgentClass.MOTORCYCLIST: 0.8,
    AgentClass.CYCLIST: 0.6,
    AgentClass.PEDESTRIAN: 0.0,
}


def as_trajectory(points, name: str = "trajectory") -> np.ndarray:
    """Validate and convert ``points`` to a finite ``(T, 2)`` float64 array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError(f"{name} must have shape (T, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_trajectories(points, name: str = "trajectories") -> np.ndarray:
    """Validate a batch of equal-length trajectories, shape ``(N, T, 2)``."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have shape (N, T, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_pair(a, b):
    a = as_trajectory(a, "a")
    b = as_trajectory(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"trajectory length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def ade(a, b) -> float:
    """Average displacement error: mean pointwise Euclidean distance."""
    a, b = _check_pair(a, b)
    d = a - b
    return float(np.mean(np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2)))


def fde(a, b) -> float:
    """Final displacement error: distance between the last points."""
    a, b = _check_pair(a, b)
    return float(math.hypot(a[-1, 0] - b[-1, 0], a[-1, 1] - b[-1, 1]))


def ade_to_many(traj: np.ndarray, many: np.ndarray) -> np.ndarray:
    """ADE between one ``(T, 2)`` trajectory and every member of ``(N, T, 2)``."""
    d = many - traj[None]
    return np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2).mean(axis=1)


def fde_to_many(traj: np.ndarray, many: np.ndarray) -> np.ndarray:
    d = many[:, -1] - traj[-1]
    return np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2)


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class LocalFrame:
    """Rigid transform from the global frame into an agent-centric frame.

    ``origin`` is the last observed global position and ``rotation`` the
    global heading angle that maps onto the local +x axis.
    """

    origin: tuple[float, float]
    rotation: float

    def __post_init__(self):
        if not (-math.pi < self.rotation <= math.pi):
            raise ValueError(f"rotation {self.rotation} outside (-pi, pi]")
        if not all(math.isfinite(v) for v in self.origin):
            raise ValueError("origin must be finite")

    def to_local(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        # row vectors: p_local = R(-theta) (p - o)  ==  (p - o) @ R(theta)
        return (p - np.asarray(self.origin)) @ _rotation(self.rotation)

    def to_global(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ _rotation(self.rotation).T + np.asarray(self.origin)


def estimate_heading(past: np.ndarray) -> float:
    """Heading of the last past displacement longer than 1 cm, else 0."""
    steps = np.diff(past, axis=0)
    for dx, dy in steps[::-1]:
        if math.hypot(dx, dy) >= HEADING_MIN_DISPLACEMENT:
            theta = math.atan2(dy, dx)
            return math.pi if theta == -math.pi else theta
    return 0.0


def to_local_frame(past, *others):
    """Express a track in the agent-centric frame of its last observed point.

    Args:
        past: observed global positions, shape ``(T_p, 2)``, ``T_p >= 1``.
        *others: further global point arrays (future, other agents, the ego
            plan) to transform with the same frame.

    Returns:
        ``(frame, local_past, *local_others)``.
    """
    past = as_trajectory(past, "past")
    frame = LocalFrame(origin=(float(past[-1, 0]), float(past[-1, 1])),
                       rotation=estimate_heading(past))
    return (frame, frame.to_local(past), *(frame.to_local(o) for o in others))


def _dedup(points: np.ndarray) -> np.ndarray:
    kept = [points[0]]
    for p in points[1:]:
        if math.hypot(p[0] - kept[-1][0], p[1] - kept[-1][1]) >= DUPLICATE_CHORD:
            kept.append(p)
    return np.asarray(kept)


def circumradius(p1, p2, p3) -> float:
    """Radius of the circle through three points; ``inf`` when collinear."""
    a = math.hypot(p2[0] - p1[0], p2[1] - p1[1])
    b = math.hypot(p3[0] - p2[0], p3[1] - p2[1])
    c = math.hypot(p3[0] - p1[0], p3[1] - p1[1])
    area = 0.5 * abs((p2[0] - p1[0]) * (p3[1] - p1[1]) - (p2[1] - p1[1]) * (p3[0] - p1[0]))
    if area < DEGENERATE_AREA:
        return math.inf
    return a * b * c / (4.0 * area)


def min_turn_radius(traj, last_observed) -> float:
    """Smallest circumradius over consecutive triples of ``[last_observed] + traj``.

    Near-duplicate points (closer than 1 mm to the previously kept point) are
    dropped first, and triples with any chord below 1 mm are ignored.
    """
    traj = as_trajectory(traj)
    if traj.shape[0] < 2:
        raise ValueError("trajectory needs at least 2 points")
    start = np.asarray(last_observed, dtype=np.float64).reshape(1, 2)
    pts = _dedup(np.concatenate([start, traj]))
    best = math.inf
    for i in range(len(pts) - 2):
        p1, p2, p3 = pts[i], pts[i + 1], pts[i + 2]
        if math.hypot(p3[0] - p1[0], p3[1] - p1[1]) < DUPLICATE_CHORD:
            continue
        best = min(best, circumradius(p1, p2, p3))
    return best
