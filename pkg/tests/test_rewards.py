"""Closed-form and property tests for the reward penalization schemes."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mailab.trainers import RewardScheme, compute_reward

ALL_SCHEMES = list(RewardScheme)
ZERO_AT_HALF = [RewardScheme.LOG_SHIFT, RewardScheme.LINEAR, RewardScheme.TAN]
ALWAYS_POSITIVE = [RewardScheme.LOG, RewardScheme.LOG_SCALED]

# independently computed closed forms
CLOSED_FORMS = {
    RewardScheme.LOG: lambda d: -math.log(d),
    RewardScheme.LOG_SCALED: lambda d: -math.log(d) / 10.0,
    RewardScheme.LOG_SHIFT: lambda d: -math.log(d + 0.5),
    RewardScheme.LINEAR: lambda d: 0.5 - d,
    RewardScheme.TAN: lambda d: math.tan(0.5 - d),
}


class TestClosedForms:
    @pytest.mark.parametrize("scheme", ALL_SCHEMES)
    @pytest.mark.parametrize("d", [0.1, 0.2, 0.5, 0.8, 1.0 - 1e-7])
    def test_matches_closed_form(self, scheme, d):
        assert compute_reward(scheme, d) == pytest.approx(
            CLOSED_FORMS[scheme](d), abs=1e-9
        )

    def test_spec_values(self):
        assert compute_reward(RewardScheme.LOG_SHIFT, 0.5) == 0.0
        assert compute_reward(RewardScheme.LOG, 0.5) == pytest.approx(0.693147, abs=1e-6)
        assert compute_reward(RewardScheme.LINEAR, 0.2) == pytest.approx(0.3, abs=1e-12)
        assert compute_reward(RewardScheme.TAN, 0.0) == pytest.approx(
            math.tan(0.5 - 1e-7), abs=1e-12
        )
        assert compute_reward(RewardScheme.LOG_SHIFT, 1.0) == pytest.approx(
            -math.log(1.5 - 1e-7), abs=1e-12
        )

    def test_equilibrium_is_exactly_zero(self):
        for scheme in ZERO_AT_HALF:
            assert compute_reward(scheme, 0.5) == 0.0

    def test_accepts_string_names_and_arrays(self):
        d = np.array([0.25, 0.5, 0.75], dtype=np.float32)
        out = compute_reward("linear", d)
        assert out.dtype == np.float32
        assert np.allclose(out, [0.25, 0.0, -0.25])


class TestProperties:
    @pytest.mark.parametrize("scheme", ALL_SCHEMES)
    @given(d=st.floats(1e-6, 1 - 1e-6))
    @settings(max_examples=60, deadline=None)
    def test_sign_structure(self, scheme, d):
        r = float(compute_reward(scheme, d))
        if scheme in ALWAYS_POSITIVE:
            assert r > 0
        else:
            assert np.sign(r) == np.sign(0.5 - d)

    @pytest.mark.parametrize("scheme", ALL_SCHEMES)
    @given(
        d1=st.floats(1e-6, 1 - 1e-6),
        d2=st.floats(1e-6, 1 - 1e-6),
    )
    @settings(max_examples=60, deadline=None)
    def test_strictly_decreasing(self, scheme, d1, d2):
        if d1 == d2:
            return
        lo, hi = min(d1, d2), max(d1, d2)
        assert compute_reward(scheme, lo) > compute_reward(scheme, hi)

    @pytest.mark.parametrize("scheme", ALL_SCHEMES)
    def test_finite_at_boundaries_after_clamping(self, scheme):
        assert np.isfinite(compute_reward(scheme, 0.0))
        assert np.isfinite(compute_reward(scheme, 1.0))
