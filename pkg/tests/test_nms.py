import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import nms_filter
from trajset.nms import ScoredSet, nms_indices, select_nms
from trajset.setgen import TrajectorySet


def scored(endpoints, probs):
    ends = np.asarray(endpoints, dtype=float)
    trajs = np.stack([np.linspace([0.0, 0.0], e, 4) for e in ends]) + 1e-3 * np.arange(len(ends))[:, None, None]
    trajs[:, -1] = ends
    return ScoredSet(TrajectorySet(trajs), probs)


def test_hand_trace():
    s = scored([(0, 0), (1, 0), (10, 0)], [0.5, 0.3, 0.2])
    out = select_nms(s, 2, 1.8)
    assert [p for _, p in out] == [0.5, 0.2]
    assert nms_indices(s.set.endpoints, s.probs, 2, 1.8) == [0, 2]


def test_zero_radius_is_top_k():
    s = scored([(0, 0), (0, 0), (5, 5)], [0.2, 0.5, 0.3])
    assert nms_indices(s.set.endpoints, s.probs, 2, 0.0) == [1, 2]


def test_fallback_refills():
    s = scored([(1, 1)] * 4, [0.1, 0.4, 0.3, 0.2])
    assert nms_indices(s.set.endpoints, s.probs, 2, 1.8) == [1, 2]


def test_boundary_inclusive_suppression():
    s = scored([(0, 0), (1.8, 0), (5, 0)], [0.5, 0.3, 0.2])
    assert nms_indices(s.set.endpoints, s.probs, 2, 1.8) == [0, 2]


def test_probability_ties_lower_index():
    s = scored([(0, 0), (10, 0), (20, 0)], [0.25, 0.5, 0.25])
    assert nms_indices(s.set.endpoints, s.probs, 3, 1.0) == [1, 0, 2]


def test_errors():
    s = scored([(0, 0), (1, 0)], [0.5, 0.5])
    with pytest.raises(ValueError):
        nms_indices(s.set.endpoints, s.probs, 3, 1.0)
    with pytest.raises(ValueError):
        nms_indices(s.set.endpoints, s.probs, 0, 1.0)
    with pytest.raises(ValueError):
        nms_indices(s.set.endpoints, s.probs, 1, -1.0)
    with pytest.raises(ValueError):
        scored([(0, 0), (1, 0)], [0.7, 0.7])


@st.composite
def scored_sets(draw):
    n = draw(st.integers(1, 30))
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    ends = np.round(rng.uniform(-6, 6, size=(n, 2)), draw(st.integers(0, 3)))
    raw = rng.random(n) ** 3
    if draw(st.booleans()):
        raw = np.round(raw, 1) + 1e-3
    probs = raw / raw.sum()
    k = draw(st.integers(1, n))
    r = draw(st.sampled_from([0.0, 0.5, 1.8, 3.0, 20.0]))
    return ends, probs, k, r


@settings(max_examples=1000, deadline=None)
@given(scored_sets())
def test_nms_properties(case):
    ends, probs, k, r = case
    idx = nms_indices(ends, probs, k, r)
    assert len(idx) == k and len(set(idx)) == k
    assert idx[0] == int(np.argmax(probs))
    assert all(probs[a] >= probs[b] for a, b in zip(idx, idx[1:]))
    if r == 0:
        assert idx == sorted(range(len(probs)), key=lambda i: (-probs[i], i))[:k]
        return
    kept = nms_filter(ends, probs, r)
    if len(kept) >= k:
        assert idx == kept[:k]
        for n, a in enumerate(idx):
            for b in idx[n + 1:]:
                assert np.linalg.norm(ends[a] - ends[b]) > r
    else:
        assert idx[: len(kept)] == kept or set(kept) <= set(idx)
