import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deskrl.a3c import HTransform, Identity, compute_targets, h_inverse, h_transform


def oracle_h(z, eps=0.01):
    return math.copysign(math.sqrt(abs(z) + 1) - 1, z) + eps * z


def oracle_h_inv(y, eps=0.01):
    lo, hi = -1e9, 1e9
    for _ in range(200):
        mid = (lo + hi) / 2
        if oracle_h(mid, eps) < y:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def test_h_at_zero():
    assert h_transform(0.0, 0.01) == 0.0
    assert h_inverse(0.0, 0.01) == 0.0


def test_h_of_three():
    assert h_transform(3.0, 0.01) == pytest.approx(1.03, abs=1e-12)
    assert h_transform(-3.0, 0.01) == pytest.approx(-1.03, abs=1e-12)


def test_h_inverse_closed_form_matches_bisection():
    tr = HTransform(0.01)
    assert tr.h_inv(1.03) == pytest.approx(3.0, abs=1e-9)
    rng = np.random.default_rng(0)
    for y in rng.uniform(-100, 100, size=20):
        assert float(tr.h_inv(y)) == pytest.approx(oracle_h_inv(y), abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e4, 1e4))
def test_roundtrip(z):
    tr = HTransform(0.01)
    back = float(tr.h_inv(tr.h(z)))
    assert abs(back - z) <= 1e-9 * max(1.0, abs(z))
    fwd = float(tr.h(tr.h_inv(z)))
    assert abs(fwd - z) <= 1e-9 * max(1.0, abs(z))


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_h_monotone_and_odd(a, b):
    tr = HTransform(0.01)
    if a < b:
        assert float(tr.h(a)) < float(tr.h(b))
    assert float(tr.h(-a)) == -float(tr.h(a))


def test_targets_identity_reduce_to_n_step():
    # gamma=0.5, r=[1,1], bootstrap 10: t1 = 1+5 = 6, t0 = 1+3 = 4
    t = compute_targets([1.0, 1.0], 10.0, 0.5, "raw_tb", Identity())
    np.testing.assert_allclose(t, [4.0, 6.0])


def test_targets_terminal_zero_rewards():
    for mode, tr in [("clipped", None), ("raw_tb", HTransform(0.01))]:
        t = compute_targets([0.0, 0.0, 0.0], 0.0, 0.99, mode, tr)
        np.testing.assert_array_equal(t, [0.0, 0.0, 0.0])


def test_targets_single_step_raw_tb():
    t = compute_targets([3.0], 0.0, 0.99, "raw_tb", HTransform(0.01))
    assert t[0] == pytest.approx(1.03, abs=1e-12)


def test_targets_clipped_mode_clips():
    t = compute_targets([10.0, -7.0], 0.0, 1.0, "clipped")
    # rewards clipped to [1, -1]: t1 = -1, t0 = 1 + (-1) = 0
    np.testing.assert_allclose(t, [0.0, -1.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30),
       st.floats(0, 1), st.floats(-3, 3))
def test_identity_recursion_equals_discounted_sum(rewards, gamma, boot):
    via_recursion = compute_targets(rewards, boot, gamma, "raw_tb", Identity())
    expected = np.empty(len(rewards))
    for t in range(len(rewards)):
        acc = 0.0
        for k, r in enumerate(rewards[t:]):
            acc += (gamma ** k) * r
        acc += (gamma ** (len(rewards) - t)) * boot
        expected[t] = acc
    np.testing.assert_allclose(via_recursion, expected, rtol=1e-10, atol=1e-10)


def test_empty_segment_rejected():
    with pytest.raises(ValueError, match="empty"):
        compute_targets([], 0.0, 0.99, "clipped")
