import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import circle_points
from trajset.core import (
    AgentClass,
    ClassGroup,
    LocalFrame,
    ade,
    fde,
    min_turn_radius,
    to_local_frame,
)

coords = st.floats(-100, 100, allow_nan=False, width=64)


def traj_strategy(n):
    return arrays(np.float64, (n, 2), elements=coords)


def test_ade_identity_and_offset():
    a = np.array([[0.0, 0.0], [1.0, 2.0], [5.0, -1.0]])
    assert ade(a, a) == 0.0
    assert ade(a, a + [3.0, 4.0]) == pytest.approx(5.0, abs=1e-12)


def test_ade_hand_computed():
    a = [(0, 0), (1, 0), (2, 0)]
    b = [(0, 1), (1, 2), (2, 0)]
    assert ade(a, b) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("a_end, b_end, expected", [
    ((0, 0), (0, 0), 0.0),
    ((0, 0), (3, 4), 5.0),
    ((1, 1), (1, 3), 2.0),
])
def test_fde_endpoints(a_end, b_end, expected):
    a = np.array([[7.0, 7.0], a_end])
    b = np.array([[-2.0, 1.0], b_end])
    assert fde(a, b) == pytest.approx(expected, abs=1e-15)


def test_length_mismatch_raises():
    with pytest.raises(ValueError, match="mismatch"):
        ade(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ValueError, match="mismatch"):
        fde(np.zeros((3, 2)), np.zeros((2, 2)))


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        ade([[0, np.nan]], [[0, 0]])


@settings(max_examples=200, deadline=None)
@given(traj_strategy(6), traj_strategy(6), traj_strategy(6))
def test_ade_is_a_metric(a, b, c):
    assert ade(a, b) == pytest.approx(ade(b, a), abs=1e-12)
    assert ade(a, b) >= 0 and fde(a, b) >= 0
    assert ade(a, c) <= ade(a, b) + ade(b, c) + 1e-9
    assert fde(a, b) == pytest.approx(fde(b, a), abs=1e-12)
    if np.max(np.abs(a - b)) > 1e-100:
        assert ade(a, b) > 0


def test_class_groups_total():
    for cls in AgentClass:
        assert cls.group in (ClassGroup.NON_VULNERABLE, ClassGroup.VULNERABLE)
    assert AgentClass.CYCLIST.group is ClassGroup.VULNERABLE
    assert AgentClass.MOTORCYCLIST.group is ClassGroup.NON_VULNERABLE


def test_local_frame_stationary_agent():
    past = np.tile([[12.0, -3.0]], (5, 1))
    frame, local = to_local_frame(past)
    assert frame.rotation == 0.0
    assert np.allclose(local, 0.0)


def test_local_frame_north_heading():
    past = np.column_stack([np.full(5, 4.0), np.arange(5.0)])
    future = np.array([[4.0, 14.0]])
    frame, _, lf = to_local_frame(past, future)
    assert frame.rotation == pytest.approx(math.pi / 2)
    assert np.allclose(lf, [[10.0, 0.0]], atol=1e-12)


def test_heading_ignores_jitter_below_one_cm():
    past = np.array([[0.0, 0.0], [1.0, 1.0], [1.0 + 1e-3, 1.0 - 2e-3]])
    frame, _ = to_local_frame(past)
    assert frame.rotation == pytest.approx(math.pi / 4)


def test_rotation_range():
    past = np.array([[1.0, 0.0], [0.0, 0.0]])
    frame, _ = to_local_frame(past)
    assert frame.rotation == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        LocalFrame((0.0, 0.0), -math.pi)


@settings(max_examples=100, deadline=None)
@given(traj_strategy(4), traj_strategy(7))
def test_local_frame_rigid_and_invertible(past, future):
    frame, lp, lf = to_local_frame(past, future)
    assert np.allclose(lp[-1], 0.0, atol=1e-9)
    pts = np.concatenate([past, future])
    loc = np.concatenate([lp, lf])
    d_g = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    d_l = np.linalg.norm(loc[:, None] - loc[None], axis=-1)
    assert np.max(np.abs(d_g - d_l)) <= 1e-9
    assert np.max(np.abs(frame.to_global(loc) - pts)) <= 1e-9


def test_min_turn_radius_cases():
    line = np.column_stack([np.arange(1.0, 6.0), np.zeros(5)])
    assert min_turn_radius(line, (0.0, 0.0)) == math.inf
    assert min_turn_radius(np.zeros((5, 2)), (0.0, 0.0)) == math.inf
    circ = circle_points(1.0, 8)
    assert min_turn_radius(circ[1:], circ[0]) == pytest.approx(1.0, abs=1e-6)


def test_min_turn_radius_skips_near_duplicates():
    circ = circle_points(5.0, 6, step=0.5)
    jittered = np.insert(circ, 3, circ[2] + [2e-4, -3e-4], axis=0)
    assert min_turn_radius(jittered[1:], jittered[0]) == pytest.approx(5.0, rel=1e-9)


def test_min_turn_radius_needs_two_points():
    with pytest.raises(ValueError):
        min_turn_radius(np.zeros((1, 2)), (0, 0))


@settings(max_examples=100, deadline=None)
@given(traj_strategy(6), st.floats(-math.pi, math.pi), coords, coords)
def test_min_turn_radius_rigid_invariance(traj, theta, tx, ty):
    start = np.array([0.5, -0.5])
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    r0 = min_turn_radius(traj, start)
    r1 = min_turn_radius(traj @ rot.T + [tx, ty], rot @ start + [tx, ty])
    if math.isinf(r0) or math.isinf(r1) or r0 > 1e6:
        return
    assert r1 == pytest.approx(r0, rel=1e-6)
