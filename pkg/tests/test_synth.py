import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajset.core import AgentClass, fde_to_many, min_turn_radius
from trajset.metrics import tri
from trajset.setgen import generate_set_metric_driven
from trajset.synth import (
    MIN_BRANCH_SEPARATION,
    BicycleState,
    Profile,
    make_dataset,
    make_interaction_dataset,
    make_interaction_scenario,
    rollout_bicycle,
)


def test_straight_rollout():
    pts, final = rollout_bicycle(BicycleState(speed=5.0), (0.0, 0.0), steps=10, dt=0.1)
    assert np.allclose(pts[:, 0], 0.5 * np.arange(1, 11), atol=1e-12)
    assert np.allclose(pts[:, 1], 0.0)
    assert final.speed == 5.0


def test_circular_rollout_radius():
    steer, L, v = 0.3, 2.7, 8.0
    radius = L / math.tan(steer)
    pts, _ = rollout_bicycle(BicycleState(speed=v), (0.0, steer), wheelbase=L, steps=80, dt=0.1)
    # fit the centre from three samples, then check every distance
    a, b, c = pts[0], pts[30], pts[60]
    A = np.array([b - a, c - a]) * 2
    rhs = np.array([b @ b - a @ a, c @ c - a @ a])
    centre = np.linalg.solve(A, rhs)
    dist = np.linalg.norm(pts - centre, axis=1)
    assert np.allclose(dist, radius, rtol=0.01)
    assert min_turn_radius(pts, (0.0, 0.0)) == pytest.approx(radius, rel=0.01)


def test_stationary_rollout():
    pts, _ = rollout_bicycle(BicycleState(), (0.0, 0.2), steps=5)
    assert np.all(pts == 0.0)


def test_speed_clamped_and_errors():
    _, final = rollout_bicycle(BicycleState(speed=1.0), (-5.0, 0.0), steps=10)
    assert final.speed == 0.0
    with pytest.raises(ValueError):
        rollout_bicycle(BicycleState(speed=1.0), (0.0, math.pi / 2), steps=3)
    with pytest.raises(ValueError):
        rollout_bicycle(BicycleState(speed=1.0), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        BicycleState(speed=-1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-50, 50), st.floats(-50, 50), st.integers(0, 1000))
def test_rollout_rigid_equivariance(theta, tx, ty, seed):
    rng = np.random.default_rng(seed)
    u = np.column_stack([rng.normal(0, 1, 20), rng.uniform(-0.4, 0.4, 20)])
    base, _ = rollout_bicycle(BicycleState(speed=6.0), u)
    moved, _ = rollout_bicycle(BicycleState(tx, ty, theta, 6.0), u)
    c, s = math.cos(theta), math.sin(theta)
    assert np.max(np.abs(base @ np.array([[c, s], [-s, c]]) + [tx, ty] - moved)) <= 1e-9


@pytest.fixture(scope="module")
def bench():
    return make_dataset(Profile(n_vehicle=300, n_pedestrian=150, n_cyclist=20, n_bus=10, n_motorcyclist=10, seed=5))


def test_dataset_shapes(bench):
    for sc in bench.scenarios:
        assert sc.focal_past.shape == (20, 2) and sc.focal_future.shape == (60, 2)
        assert np.all(np.isfinite(sc.focal_future))
        assert np.allclose(sc.focal_past[-1], 0.0, atol=1e-9)


def test_dataset_deterministic():
    a = make_dataset(n_vehicle=20, n_pedestrian=10, seed=4)
    b = make_dataset(n_vehicle=20, n_pedestrian=10, seed=4)
    assert a.futures().tobytes() == b.futures().tobytes()
    c = make_dataset(n_vehicle=20, n_pedestrian=10, seed=5)
    assert a.futures().tobytes() != c.futures().tobytes()


def test_vehicle_feasibility(bench):
    veh = [s for s in bench.scenarios if s.focal_class in (AgentClass.VEHICLE, AgentClass.BUS)]
    value = tri([s.focal_future[None] for s in veh], [s.focal_class for s in veh])
    assert value <= 1.0


def test_pedestrians_slower(bench):
    def speed(cls):
        return np.mean([np.linalg.norm(np.diff(s.focal_future, axis=0), axis=1).mean()
                        for s in bench.scenarios if s.focal_class is cls])
    assert speed(AgentClass.PEDESTRIAN) < speed(AgentClass.VEHICLE)


def test_default_population():
    ds = make_dataset(n_vehicle=3, n_pedestrian=2)
    assert {s.focal_class for s in ds.scenarios} == {AgentClass.VEHICLE, AgentClass.PEDESTRIAN}


def test_interaction_rules():
    go = make_interaction_scenario(11, seed=0, av_plan="go")
    stop = make_interaction_scenario(11, seed=0, av_plan="stop")
    assert np.array_equal(go.focal_past, stop.focal_past)
    assert np.array_equal(go.av_past, stop.av_past)
    assert stop.meta["intent"] == "proceed" and go.meta["intent"] == "yield"
    # yielding covers less ground than proceeding
    assert np.linalg.norm(go.focal_future[-1]) < np.linalg.norm(stop.focal_future[-1])
    assert np.linalg.norm(stop.focal_future[-1] - go.focal_future[-1]) >= MIN_BRANCH_SEPARATION


def test_interaction_dataset_properties():
    ds = make_interaction_dataset(200, seed=1)
    plans = [s.meta["av_plan"] for s in ds.scenarios]
    assert 60 < plans.count("stop") < 140
    assert min(s.meta["branch_separation"] for s in ds.scenarios) >= MIN_BRANCH_SEPARATION
    for s in ds.scenarios:
        assert s.av_future.shape == (60, 2) and s.av_past.shape == (20, 2)
    again = make_interaction_dataset(200, seed=1)
    assert ds.futures().tobytes() == again.futures().tobytes()
    # scenario streams are independent of generation order
    assert np.array_equal(make_interaction_scenario(150, seed=1).focal_future, ds.scenarios[150].focal_future)


def test_intent_oracle_beats_constant_predictor():
    ds = make_interaction_dataset(200, seed=2)
    fut = ds.futures()
    tset, _ = generate_set_metric_driven(fut, 32)
    # oracle: knows the intent, hence the branch; blind: one member for everyone
    oracle = np.mean([fde_to_many(f, tset.trajectories).min() for f in fut])
    blind = min(np.mean([fde_to_many(f, tset.trajectories)[j] for f in fut]) for j in range(len(tset)))
    assert oracle < blind
    with pytest.raises(ValueError):
        make_interaction_dataset(0, seed=0)
