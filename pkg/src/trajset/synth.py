"""Synthetic agent tracks.

Non-vulnerable agents are rolled out with a kinematic single-track model
under feasible controls; pedestrians and cyclists are noisy walkers.  All
tracks are generated at a random world pose and stored in the focal agent's
local frame.  Every scenario draws from its own ``SeedSequence([seed, id])``
stream, so scenarios can be generated in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from trajset.core import AgentClass, fde, to_local_frame

DEFAULT_DT = 0.1
DEFAULT_T_PAST = 20
DEFAULT_T_FUTURE = 60
DEFAULT_WHEELBASE = 2.7

MIN_BRANCH_SEPARATION = 5.0


@dataclass
class BicycleState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    speed: float = 0.0

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be non-negative")
        if not all(math.isfinite(v) for v in (self.x, self.y, self.heading, self.speed)):
            raise ValueError("state must be finite")


def rollout_bicycle(initial: BicycleState, controls, wheelbase: float = DEFAULT_WHEELBASE,
                    steps: int | None = None, dt: float = DEFAULT_DT) -> tuple[np.ndarray, BicycleState]:
    """Forward-Euler rollout of the kinematic bicycle model.

    Args:
        initial: starting state.
        controls: ``(steps, 2)`` array of ``(acceleration, steering)``; a single
            pair is repeated ``steps`` times.

    Returns:
        ``(steps, 2)`` positions after each step and the final state.
    """
    u = np.asarray(controls, dtype=np.float64)
    if u.ndim == 1:
        if steps is None:
            raise ValueError("steps required with constant controls")
        u = np.tile(u, (steps, 1))
    steps = u.shape[0] if steps is None else steps
    if steps < 1 or u.shape != (steps, 2):
        raise ValueError(f"controls must have shape ({steps}, 2)")
    if dt <= 0 or wheelbase <= 0:
        raise ValueError("dt and wheelbase must be positive")
    if np.any(np.abs(u[:, 1]) >= math.pi / 2):
        raise ValueError("steering magnitude must be below pi/2")

    x, y, th, v = initial.x, initial.y, initial.heading, initial.speed
    out = np.empty((steps, 2))
    for t in range(steps):
        acc, steer = u[t]
        th += v / wheelbase * math.tan(steer) * dt
        x += v * math.cos(th) * dt
        y += v * math.sin(th) * dt
        v = max(0.0, v + acc * dt)
        out[t] = (x, y)
    return out, BicycleState(x, y, th, v)


@dataclass
class Scenario:
    """One focal agent with context, all in the focal agent's local frame."""

    scenario_id: int
    focal_class: AgentClass
    focal_past: np.ndarray
    focal_future: np.ndarray
    others: list[tuple[AgentClass, np.ndarray]] = field(default_factory=list)
    av_past: np.ndarray | None = None
    av_future: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)


@dataclass
class Dataset:
    scenarios: list[Scenario]
    dt: float = DEFAULT_DT
    t_past: int = DEFAULT_T_PAST
    t_future: int = DEFAULT_T_FUTURE
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.scenarios)

    def futures(self) -> np.ndarray:
        return np.stack([s.focal_future for s in self.scenarios])

    def pasts(self) -> np.ndarray:
        return np.stack([s.focal_past for s in self.scenarios])

    def classes(self) -> list[AgentClass]:
        return [s.focal_class for s in self.scenarios]

    def subset(self, idx) -> "Dataset":
        return Dataset([self.scenarios[i] for i in idx], self.dt, self.t_past, self.t_future, dict(self.meta))


@dataclass
class Profile:
    """Population and motion parameters for ``make_dataset``."""

    n_vehicle: int = 100
    n_pedestrian: int = 100
    n_bus: int = 0
    n_motorcyclist: int = 0
    n_cyclist: int = 0
    t_past: int = DEFAULT_T_PAST
    t_future: int = DEFAULT_T_FUTURE
    dt: float = DEFAULT_DT
    vehicle_speed: tuple[float, float] = (3.0, 15.0)
    pedestrian_speed: tuple[float, float] = (0.3, 1.8)
    cyclist_speed: tuple[float, float] = (2.0, 6.0)
    max_curvature: float = 0.2
    seed: int = 0

    def counts(self) -> list[tuple[AgentClass, int]]:
        return [
            (AgentClass.VEHICLE, self.n_vehicle),
            (AgentClass.BUS, self.n_bus),
            (AgentClass.MOTORCYCLIST, self.n_motorcyclist),
            (AgentClass.CYCLIST, self.n_cyclist),
            (AgentClass.PEDESTRIAN, self.n_pedestrian),
        ]


VEHICLE_MANEUVERS = ("straight", "turn", "stop", "lane_change")

_WHEELBASE = {AgentClass.VEHICLE: 2.7, AgentClass.BUS: 6.0, AgentClass.MOTORCYCLIST: 1.5}


def _stream(seed: int, scenario_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, scenario_id]))


def _steer_for_curvature(kappa: float, wheelbase: float) -> float:
    return math.atan(kappa * wheelbase)


def _vehicle_track(rng, cls: AgentClass, prof: Profile) -> tuple[np.ndarray, str]:
    lo, hi = prof.vehicle_speed
    if cls is AgentClass.MOTORCYCLIST:
        hi *= 1.2
    L = _WHEELBASE[cls]
    # smallest radius stays well above every class threshold
    kmax = prof.max_curvature if cls is not AgentClass.BUS else prof.max_curvature / 2
    v0 = rng.uniform(lo, hi)
    past_kappa = rng.uniform(-0.01, 0.01)
    n_p, n_f = prof.t_past, prof.t_future
    maneuver = VEHICLE_MANEUVERS[rng.integers(len(VEHICLE_MANEUVERS))]

    past_u = np.column_stack([np.full(n_p - 1, rng.normal(0, 0.2)),
                              np.full(n_p - 1, _steer_for_curvature(past_kappa, L))])
    fut_acc = np.full(n_f, rng.normal(0, 0.3))
    fut_kappa = np.full(n_f, past_kappa)
    if maneuver == "turn":
        kappa = rng.uniform(0.03, kmax) * rng.choice([-1, 1])
        ramp = int(rng.integers(5, 20))
        dur = int(rng.integers(25, n_f))
        prof_k = np.zeros(n_f)
        prof_k[:ramp] = np.linspace(0, kappa, ramp)
        prof_k[ramp:dur] = kappa
        prof_k[dur:] = np.linspace(kappa, 0, n_f - dur) if n_f > dur else 0
        fut_kappa = prof_k
        fut_acc = np.full(n_f, -min(1.5, v0 / 6.0) * rng.uniform(0, 1))
    elif maneuver == "stop":
        fut_acc = np.full(n_f, -rng.uniform(max(0.5, v0 / 6.0), 4.0))
    elif maneuver == "lane_change":
        width = rng.uniform(2.5, 4.0) * rng.choice([-1, 1])
        dur = rng.uniform(2.5, 4.5)
        t = np.arange(n_f) * prof.dt
        # lateral offset w/2 (1 - cos(pi t / dur)) differentiated twice over speed**2
        lat_acc = np.where(t < dur, width / 2 * (math.pi / dur) ** 2 * np.cos(math.pi * t / dur), 0.0)
        fut_kappa = np.clip(lat_acc / max(v0, 1.0) ** 2, -kmax, kmax)
    fut_u = np.column_stack([fut_acc, [_steer_for_curvature(k, L) for k in fut_kappa]])
    controls = np.concatenate([past_u, fut_u])
    start = BicycleState(0.0, 0.0, 0.0, v0)
    pts, _ = rollout_bicycle(start, controls, wheelbase=L, dt=prof.dt)
    return np.concatenate([[[0.0, 0.0]], pts]), maneuver


def _walker_track(rng, cls: AgentClass, prof: Profile) -> tuple[np.ndarray, str]:
    lo, hi = prof.cyclist_speed if cls is AgentClass.CYCLIST else prof.pedestrian_speed
    noise = 0.02 if cls is AgentClass.CYCLIST else 0.08
    n = prof.t_past + prof.t_future
    speed = rng.uniform(lo, hi)
    maneuver = "walk"
    speeds = np.full(n - 1, speed)
    if rng.random() < 0.15:
        maneuver = "stop"
        stop_at = prof.t_past + int(rng.integers(0, prof.t_future))
        speeds[stop_at:] = 0.0
    heading = np.cumsum(rng.normal(0, noise, n - 1))
    if rng.random() < 0.25:
        maneuver = "turn" if maneuver == "walk" else maneuver
        turn_at = prof.t_past + int(rng.integers(0, prof.t_future // 2))
        heading[turn_at:] += rng.uniform(-math.pi / 2, math.pi / 2)
    steps = np.column_stack([np.cos(heading), np.sin(heading)]) * (speeds * prof.dt)[:, None]
    return np.concatenate([[[0.0, 0.0]], np.cumsum(steps, axis=0)]), maneuver


def _random_pose(rng, track: np.ndarray) -> np.ndarray:
    theta = rng.uniform(-math.pi, math.pi)
    c, s = math.cos(theta), math.sin(theta)
    offset = rng.uniform(-500, 500, size=2)
    return track @ np.array([[c, s], [-s, c]]) + offset


def make_agent(scenario_id: int, cls: AgentClass, prof: Profile) -> Scenario:
    rng = _stream(prof.seed, scenario_id)
    if cls in _WHEELBASE:
        track, maneuver = _vehicle_track(rng, cls, prof)
    else:
        track, maneuver = _walker_track(rng, cls, prof)
    world = _random_pose(rng, track)
    _, past, future = to_local_frame(world[: prof.t_past], world[prof.t_past:])
    return Scenario(scenario_id, cls, past, future, meta={"maneuver": maneuver})


def make_dataset(profile: Profile | None = None, **overrides) -> Dataset:
    """Labeled single-agent dataset, deterministic in ``profile.seed``."""
    prof = profile or Profile()
    if overrides:
        prof = Profile(**{**prof.__dict__, **overrides})
    scenarios = []
    sid = 0
    for cls, n in prof.counts():
        if n < 0:
            raise ValueError("counts must be non-negative")
        for _ in range(n):
            scenarios.append(make_agent(sid, cls, prof))
            sid += 1
    meta = {"generator": "make_dataset", "seed": prof.seed,
            "counts": {c.value: n for c, n in prof.counts()}}
    return Dataset(scenarios, prof.dt, prof.t_past, prof.t_future, meta)


# --- AV interaction scenarios -------------------------------------------------

INTERACTION_KINDS = ("crossing", "left_turn")


def _straight(x0, y0, heading, speed, acc, n, dt):
    pts, _ = rollout_bicycle(BicycleState(x0, y0, heading, speed), (acc, 0.0), steps=n, dt=dt)
    return pts


YIELD_DISTANCE = 20.0
TURN_CURVATURE = 0.1
TURN_STEPS = 30


def _interaction_branches(kind, v_focal, n_p, n_f, dt):
    """Focal past and its two possible futures.

    Both futures depend only on the focal speed (visible in the past) and on
    the scenario kind (visible in the AV plan's direction).
    """
    start_x = -v_focal * (n_p - 1) * dt
    past = np.concatenate([[[start_x, 0.0]],
                           _straight(start_x, 0.0, 0.0, v_focal, 0.0, n_p - 1, dt)])
    # brake to a halt at the stop line
    yield_decel = v_focal ** 2 / (2.0 * YIELD_DISTANCE)
    yielding = _straight(0.0, 0.0, 0.0, v_focal, -yield_decel, n_f, dt)
    if kind == "crossing":
        proceed = _straight(0.0, 0.0, 0.0, v_focal, 0.0, n_f, dt)
    else:
        u = np.zeros((n_f, 2))
        u[:TURN_STEPS, 1] = math.atan(TURN_CURVATURE * DEFAULT_WHEELBASE)
        proceed, _ = rollout_bicycle(BicycleState(0.0, 0.0, 0.0, v_focal), u, dt=dt)
    return past, proceed, yielding


def make_interaction_scenario(scenario_id: int, seed: int, t_past: int = DEFAULT_T_PAST,
                              t_future: int = DEFAULT_T_FUTURE, dt: float = DEFAULT_DT,
                              av_plan: str | None = None) -> Scenario:
    """Focal agent at a conflict point with the AV.

    The AV plan is the latent intent: if the AV stops the focal agent
    proceeds, if the AV goes the focal agent yields.  Focal and AV pasts are
    drawn independently of the plan.
    """
    rng = _stream(seed, scenario_id)
    kind = INTERACTION_KINDS[rng.integers(len(INTERACTION_KINDS))]
    plan_draw = "stop" if rng.random() < 0.5 else "go"
    plan = av_plan or plan_draw
    v_focal = rng.uniform(5.0, 11.0)
    past, proceed, yielding = _interaction_branches(kind, v_focal, t_past, t_future, dt)
    if fde(proceed, yielding) < MIN_BRANCH_SEPARATION:
        raise RuntimeError(f"scenario {scenario_id}: branch endpoints closer than {MIN_BRANCH_SEPARATION} m")

    # AV approaches the conflict zone from the side (crossing) or head-on (left turn)
    v_av = rng.uniform(6.0, 12.0)
    dist_av = rng.uniform(10.0, 25.0)
    if kind == "crossing":
        cx = rng.uniform(8.0, 20.0)
        av_heading = math.pi / 2
        av_start = (cx, -dist_av - v_av * (t_past - 1) * dt)
    else:
        av_heading = math.pi
        av_start = (dist_av + v_av * (t_past - 1) * dt, 3.5)
    av_past = np.concatenate([[av_start], _straight(*av_start, av_heading, v_av, 0.0, t_past - 1, dt)])
    t_stop = dist_av / v_av
    go_acc = rng.uniform(0.0, 1.0)
    av_acc = -v_av / max(t_stop, 0.5) * 1.1 if plan == "stop" else go_acc
    av_future = _straight(av_past[-1, 0], av_past[-1, 1], av_heading, v_av, av_acc, t_future, dt)

    future = proceed if plan == "stop" else yielding

    others = []
    for _ in range(int(rng.integers(0, 3))):
        ox, oy = rng.uniform(-40, 40), rng.uniform(-40, 40)
        oh = rng.uniform(-math.pi, math.pi)
        ov = rng.uniform(0.0, 10.0)
        o = np.concatenate([[[ox, oy]], _straight(ox, oy, oh, ov, 0.0, t_past - 1, dt)])
        others.append((AgentClass.VEHICLE, o))

    theta = rng.uniform(-math.pi, math.pi)
    offset = rng.uniform(-500, 500, size=2)
    c, s_ = math.cos(theta), math.sin(theta)
    rot = np.array([[c, s_], [-s_, c]])
    world = [p @ rot + offset for p in [past, future, av_past, av_future] + [o for _, o in others]]
    _, l_past, l_future, l_av_past, l_av_future, *l_others = to_local_frame(*world)
    return Scenario(
        scenario_id, AgentClass.VEHICLE, l_past, l_future,
        others=[(cls, o) for (cls, _), o in zip(others, l_others)],
        av_past=l_av_past, av_future=l_av_future,
        meta={"kind": kind, "av_plan": plan, "intent": "proceed" if plan == "stop" else "yield",
              "branch_separation": fde(proceed, yielding)},
    )


def make_interaction_dataset(n: int, seed: int, t_past: int = DEFAULT_T_PAST,
                             t_future: int = DEFAULT_T_FUTURE, dt: float = DEFAULT_DT) -> Dataset:
    """``n`` AV-interaction scenarios; see ``make_interaction_scenario``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    scenarios = [make_interaction_scenario(i, seed, t_past, t_future, dt) for i in range(n)]
    return Dataset(scenarios, dt, t_past, t_future,
                   {"generator": "make_interaction_dataset", "seed": seed, "n": n})
