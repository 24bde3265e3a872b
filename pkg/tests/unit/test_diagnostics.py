"""Tests for per-output diagnostics, invariant families and probes."""

import dataclasses
import math

import numpy as np
import pytest

from rnpsim.config.settings import SolverConfig
from rnpsim.core.diagnostics import (
    energy,
    evaluate_invariants,
    lambda_refinement,
    power_law_exponent,
    record,
    self_convergence,
    separation,
    twin_run_stability,
    weighted_probes,
)
from rnpsim.core.models import CSV_COLUMNS, DiagnosticsRecord, PotentialVariant
from rnpsim.core.stepper import init_state, run, state_from_phases, step


def checks_by_name(checks):
    return {check.name: check for check in checks}


@pytest.fixture
def tilde_config(small_config):
    """Tiny tilde run for the twin-run probe."""
    return small_config.replace(
        variant="tilde", nx=8, ny=8, P0_amp=0.05, T_final=0.004, output_every=2
    )


class TestSeparation:
    """Tests for the distance to the boundary of the admissible set."""

    def test_flory_huggins(self, grid):
        phi = np.stack([np.full(grid.shape, 0.2), np.full(grid.shape, 0.7)])
        assert separation(phi, PotentialVariant.FLORY_HUGGINS) == pytest.approx(0.1)

    def test_tilde(self, grid):
        phi = np.stack([np.full(grid.shape, 0.2), np.full(grid.shape, 0.7)])
        assert separation(phi, PotentialVariant.TILDE) == pytest.approx(0.2)

    def test_zero_phase_has_zero_separation(self, grid):
        assert separation(np.zeros((2,) + grid.shape), PotentialVariant.FLORY_HUGGINS) == 0.0

    def test_flory_huggins_never_exceeds_tilde(self, grid, rng):
        for _ in range(20):
            phi = np.moveaxis(rng.dirichlet(np.ones(3), size=grid.shape)[..., :2], -1, 0)
            assert separation(phi, PotentialVariant.FLORY_HUGGINS) <= separation(
                phi, PotentialVariant.TILDE
            )


class TestRecord:
    """Tests for DiagnosticsRecord assembly."""

    def test_initial_record(self, small_config):
        state = init_state(small_config)
        rec = record(state, small_config)
        assert len(rec.as_row()) == len(CSV_COLUMNS) == 22
        assert rec.t == 0.0
        assert rec.w_half_gradmu == 0.0
        assert rec.w_alpha_mu == 0.0
        assert rec.Pmin == rec.Pmax == 0.5
        assert rec.R1min == pytest.approx(0.25)
        assert rec.phi1mean == 0.0
        assert rec.mass_total == pytest.approx(1.0)
        assert rec.is_finite()

    def test_yosida_gap_scales_with_lambda(self, small_config):
        state = init_state(small_config)
        rec = record(state, small_config)
        assert 0.0 < rec.yosida_gap < 1.0

    def test_round_trip_row(self, small_config):
        rec = record(init_state(small_config), small_config)
        assert DiagnosticsRecord.from_row(rec.as_row()) == rec

    def test_from_row_length_checked(self):
        with pytest.raises(ValueError):
            DiagnosticsRecord.from_row([0.0] * 5)


class TestEnergy:
    """Tests for the discrete free energy."""

    def test_uniform_state_has_no_gradient_part(self, small_config):
        state = init_state(small_config)
        assert math.isfinite(energy(state, small_config))

    def test_gradient_part_scales_with_eps(self, small_config, smooth_phases):
        g = small_config.grid
        phi = smooth_phases(g)
        P = np.full(g.shape, 0.5)
        R = np.full((2,) + g.shape, 0.25)
        base = energy(state_from_phases(small_config, phi, P, R), small_config)
        wider = small_config.replace(eps=2.0)
        stretched = energy(state_from_phases(wider, phi, P, R), wider)
        expected = 1.5 * g.dirichlet_energy(phi)
        assert stretched - base == pytest.approx(expected, rel=1e-10)


class TestInvariants:
    """Tests for the invariant families on finished runs."""

    def test_mass_drift_detected(self, small_config):
        result = run(small_config)
        last = result.records[-1]
        result.records[-1] = dataclasses.replace(last, mass_total=last.mass_total + 1e-6)
        checks = checks_by_name(evaluate_invariants(result, small_config))
        assert not checks["mass_balance"].passed
        assert checks["mass_balance"].worst == pytest.approx(1e-6, rel=1e-3)

    def test_min_max_violation_detected(self, small_config):
        result = run(small_config)
        result.records[-1] = dataclasses.replace(result.records[-1], Pmax=1.01)
        checks = checks_by_name(evaluate_invariants(result, small_config))
        assert not checks["min_max"].passed

    def test_min_max_reported_only_for_large_lambda(self, small_config):
        config = small_config.replace(lam=0.05)
        checks = checks_by_name(run(config).invariants)
        assert not checks["min_max"].asserted
        assert not checks["mean_bounds"].asserted


class TestWeightedProbes:
    """Tests for the time-weighted chemical-potential suprema."""

    def test_values(self):
        rows = [0.0] * 22
        rows[0] = 4.0  # t
        rows[16] = 3.0  # grad_mu_l2
        rows[17] = 4.0  # mu1_mean
        rec = DiagnosticsRecord.from_row(rows)
        summary = weighted_probes([rec], alpha=0.5)
        assert summary.sup_half_gradmu == pytest.approx(6.0)
        assert summary.sup_alpha_mu == pytest.approx(4.0 * 5.0)
        assert summary.finite

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            weighted_probes([], alpha=1.0)


class TestPowerLaw:
    """Tests for log-log exponent fits."""

    def test_exact_power(self):
        x = [0.1, 0.2, 0.4, 0.8]
        assert power_law_exponent(x, [3 * v**2 for v in x]) == pytest.approx(2.0)

    def test_skips_nonpositive(self):
        x = [0.0, 0.1, 0.2, 0.4]
        y = [0.0, 0.1**0.5, 0.2**0.5, 0.4**0.5]
        assert power_law_exponent(x, y) == pytest.approx(0.5)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            power_law_exponent([0.0, 1.0], [1.0, 2.0])

    def test_phase_norm_grows_linearly_from_rest(self, small_config):
        config = small_config.replace(nx=8, ny=8, P0_amp=0.1)
        state = init_state(config)
        times, norms = [], []
        for _ in range(20):
            state = step(state, config)
            times.append(state.t)
            norms.append(config.grid.l2_norm(state.phi))
        assert power_law_exponent(times, norms) >= 0.9


class TestTwinRuns:
    """Tests for the continuous-dependence probe."""

    def test_requires_tilde(self, small_config):
        with pytest.raises(ValueError):
            twin_run_stability(small_config, 0.0, 1e-6)

    def test_negative_arguments(self, tilde_config):
        with pytest.raises(ValueError):
            twin_run_stability(tilde_config, -1.0, 1e-6)

    def test_identical_runs(self, tilde_config):
        report = twin_run_stability(tilde_config, 0.0, 0.0)
        assert report.distances and all(d == 0.0 for d in report.distances)
        assert report.ratio == 1.0

    def test_perturbed_runs_stay_close(self, tilde_config):
        report = twin_run_stability(tilde_config, 0.002, 1e-6)
        assert report.times[0] >= 0.002 - 1e-12
        assert 0.0 < report.d_sigma < 1e-5
        assert math.isfinite(report.ratio)

    def test_distance_is_linear_in_perturbation(self, tilde_config):
        full = twin_run_stability(tilde_config, 0.002, 1e-5)
        half = twin_run_stability(tilde_config, 0.002, 5e-6)
        assert full.d_sigma / half.d_sigma == pytest.approx(2.0, rel=0.05)


class TestRefinementProbes:
    """Tests for the lambda reruns and self-convergence."""

    def test_lambda_refinement(self, small_config):
        config = small_config.replace(nx=8, ny=8, T_final=0.005)
        report = lambda_refinement(config, [1e-2, 1e-3])
        assert report.lambdas == [1e-2, 1e-3]
        assert len(report.gaps) == 2
        assert all(g > 0 for g in report.gaps)

    def test_self_convergence_needs_three_levels(self, small_config):
        with pytest.raises(ValueError):
            self_convergence(small_config, levels=2)

    def test_self_convergence_refines_grid_with_tau(self):
        config = SolverConfig(nx=4, ny=4, tau=1e-3, T_final=2e-3, output_every=1)
        report = self_convergence(config, levels=3)
        assert report.taus == [1e-3, 5e-4, 2.5e-4]
        assert report.grid_sizes == [(4, 4), (8, 8), (16, 16)]
        assert report.grid_means[0] == report.terminal_means[0]
        assert len(report.grid_differences) == 2

    def test_self_convergence_in_tau_only(self):
        config = SolverConfig(nx=4, ny=4, tau=1e-3, T_final=2e-3, output_every=1)
        report = self_convergence(config, levels=3, refine_grid=False)
        assert report.grid_sizes == []
        assert report.grid_ratio is None
        assert math.isfinite(report.ratio)
