"""Tests for the complex formation sources and the rate/initial-data validators."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnpsim.core.errors import StructuralError
from rnpsim.core.grid import Field
from rnpsim.core.models import ReactionCoeffs
from rnpsim.core.reactions import (
    c_star,
    initial_profile,
    separation_threshold,
    sources,
    validate_coeffs,
    validate_initial,
)

rate = st.floats(min_value=1e-3, max_value=10.0)
value = st.floats(min_value=-0.5, max_value=1.5)


class TestValidateCoeffs:
    """Tests for the rate conditions."""

    def test_baseline_valid(self, coeffs):
        report = validate_coeffs(coeffs)
        assert report.ok
        assert bool(report)

    def test_rate_condition_violated(self):
        report = validate_coeffs(ReactionCoeffs(c1=1.0, c2=0.6, c3=1.0, c4=0.01))
        assert not report.ok
        assert "min(c1, c3) > c2 + c4" in report.messages[0]

    def test_nonpositive_rate_named(self):
        report = validate_coeffs(ReactionCoeffs(c1=1.0, c2=0.0, c3=1.0, c4=0.01))
        assert report.messages == ["positivity of c2 violated: c2 = 0.0"]

    def test_equality_rejected(self):
        report = validate_coeffs(ReactionCoeffs(c1=0.5, c2=0.25, c3=1.0, c4=0.25))
        assert not report.ok


class TestValidateInitial:
    """Tests for the initial protein bounds."""

    def test_half_is_valid(self, grid, coeffs):
        assert validate_initial(Field.constant(grid, 0.5), coeffs).ok

    def test_deviation_bound_violated(self, grid, coeffs):
        # allowed deviation is (1 - 0.02) / 2 = 0.49
        report = validate_initial(np.full(grid.shape, 0.995), coeffs)
        assert not report.ok
        assert any("initial deviation bound" in m for m in report.messages)

    def test_deviation_equality_accepted(self, grid, coeffs):
        assert validate_initial(np.full(grid.shape, 0.99), coeffs).ok

    def test_negative_protein_rejected(self, grid, coeffs):
        values = np.full(grid.shape, 0.5)
        values[0, 0] = -0.1
        report = validate_initial(values, coeffs)
        assert any("nonnegativity" in m for m in report.messages)

    def test_non_finite_rejected(self, grid, coeffs):
        values = np.full(grid.shape, 0.5)
        values[1, 1] = np.inf
        assert not validate_initial(values, coeffs).ok


class TestThresholds:
    """Tests for c* and the separation threshold."""

    def test_separation_threshold(self, coeffs):
        assert separation_threshold(coeffs) == pytest.approx(0.02)

    def test_c_star_closed_form(self, coeffs):
        # growth = max(4, e^{2 * 0.02}) = 4
        assert c_star(coeffs) == pytest.approx(0.02 / 2 / 4)

    def test_c_star_long_horizon(self, coeffs):
        expected = 0.02 / 2 / (math.exp(2.0 * 1.0) * math.sqrt(2.0))
        assert c_star(coeffs, T_final=1.0, area=2.0) == pytest.approx(expected)

    def test_c_star_below_threshold(self, coeffs):
        assert c_star(coeffs) < separation_threshold(coeffs)

    def test_c_star_within_eighth_of_threshold(self, coeffs):
        bound = (coeffs.c2 + coeffs.c4) / (8.0 * min(coeffs.c1, coeffs.c3))
        for T in (0.0, 0.5, 3.0):
            for area in (0.25, 1.0, 40.0):
                assert c_star(coeffs, T_final=T, area=area) <= bound * (1 + 1e-15)

    def test_c_star_nonincreasing_in_horizon_and_area(self, coeffs):
        horizons = np.linspace(0.0, 4.0, 41)
        by_horizon = [c_star(coeffs, T_final=T) for T in horizons]
        assert np.all(np.diff(by_horizon) <= 0.0)
        areas = np.geomspace(0.01, 100.0, 41)
        by_area = [c_star(coeffs, T_final=1.0, area=a) for a in areas]
        assert np.all(np.diff(by_area) <= 0.0)
        assert by_area[-1] < by_area[0]


class TestSources:
    """Tests for the bilinear-minus-linear source terms."""

    def test_sign_structure(self, grid, coeffs):
        phiJ = np.zeros((2,) + grid.shape)
        P = np.full(grid.shape, 0.5)
        R = np.full((2,) + grid.shape, 0.25)
        src = sources(phiJ, P, R, coeffs)
        np.testing.assert_allclose(src.phi, 0.125)
        np.testing.assert_allclose(src.P, -0.25)
        np.testing.assert_allclose(src.R, -0.125)

    def test_truncation_applies(self, grid, coeffs):
        phiJ = np.zeros((2,) + grid.shape)
        P = np.full(grid.shape, 1.5)
        R = np.full((2,) + grid.shape, -0.2)
        src = sources(phiJ, P, R, coeffs)
        assert np.all(src.phi == 0.0)
        plain = sources(phiJ, P, R, coeffs, truncated=False)
        np.testing.assert_allclose(plain.phi, -0.3)

    def test_disabled_sources_vanish(self, grid, coeffs, rng):
        src = sources(
            rng.uniform(size=(2,) + grid.shape),
            rng.uniform(size=grid.shape),
            rng.uniform(size=(2,) + grid.shape),
            coeffs,
            enabled=False,
        )
        assert not np.any(src.phi) and not np.any(src.P) and not np.any(src.R)

    def test_shape_mismatch(self, grid, coeffs):
        with pytest.raises(StructuralError):
            sources(np.zeros((2, 8, 8)), np.zeros((8, 7)), np.zeros((2, 8, 8)), coeffs)

    @settings(max_examples=100, deadline=None)
    @given(rate, rate, rate, rate, value, value, value, value, value, st.booleans())
    def test_cancellation_identities(self, c1, c2, c3, c4, j1, j2, p, r1, r2, truncated):
        c = ReactionCoeffs(c1=c1, c2=c2, c3=c3, c4=c4)
        src = sources(
            np.array([[j1], [j2]]), np.array([p]), np.array([[r1], [r2]]), c,
            truncated=truncated,
        )
        assert np.all(src.R + src.phi == 0.0)
        assert np.all(src.P + (src.phi[0] + src.phi[1]) == 0.0)
        assert np.all(2 * (src.phi[0] + src.phi[1]) + (src.R[0] + src.R[1]) + src.P == 0.0)


class TestInitialProfile:
    """Tests for the free-protein initial datum."""

    def test_constant(self, grid):
        np.testing.assert_array_equal(initial_profile(grid, 0.5), np.full(grid.shape, 0.5))

    def test_cosine_mode_has_zero_mean(self, grid):
        profile = initial_profile(grid, 0.5, amp=0.1, kx=1, ky=1)
        assert profile.mean() == pytest.approx(0.5, abs=1e-14)

    def test_noise_is_seeded(self, grid):
        a = initial_profile(grid, 0.5, noise=0.01, seed=3)
        b = initial_profile(grid, 0.5, noise=0.01, seed=3)
        c = initial_profile(grid, 0.5, noise=0.01, seed=4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
