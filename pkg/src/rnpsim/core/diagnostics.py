"""Per-output diagnostics, invariant families and the observational probes.

The probes (weighted norms, twin runs, lambda refinement, self-convergence in tau and h)
report what a trajectory shows; only the invariant families feed pass/fail.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import linregress

from rnpsim.config.logging import get_logger
from rnpsim.config.settings import SolverConfig
from rnpsim.core.errors import ValidationError
from rnpsim.core.meanfield import MeanSeries, mean_bounds_check, mean_ode_residual
from rnpsim.core.models import DiagnosticsRecord, InvariantCheck, PotentialVariant, SimState
from rnpsim.core.potential import ResolventEvaluation, evaluate_resolvent, regular_part_eval
from rnpsim.core.reactions import c_star, validate_initial
from rnpsim.core.stepper import run, state_from_phases, step

MASS_TOL = 1e-10
MEAN_ODE_TOL = 1e-10
BOUND_SLACK = 1e-3
ENERGY_SLACK_PER_STEP = 1e-10
ASSERT_LAMBDA_MAX = 1e-2


def _evaluation(state: SimState, config: SolverConfig) -> ResolventEvaluation:
    params = config.potential
    return evaluate_resolvent(state.phi, params.lam, params.variant)


def separation(phi: np.ndarray, variant: PotentialVariant) -> float:
    """Distance of the phase fields from the boundary of the admissible set, min over cells."""
    if variant is PotentialVariant.TILDE:
        return float(min(phi.min(), (1.0 - phi).min()))
    return float(min(phi.min(), (1.0 - phi[0] - phi[1]).min()))


def energy(
    state: SimState, config: SolverConfig, evaluation: Optional[ResolventEvaluation] = None
) -> float:
    """eps^2/2 sum of face differences + A integral of (Moreau envelope + Lipschitz part)."""
    params = config.potential
    grid = state.grid
    if evaluation is None:
        evaluation = _evaluation(state, config)
    regular, _ = regular_part_eval(state.phi, params)
    gradient_part = 0.5 * params.eps**2 * grid.dirichlet_energy(state.phi)
    bulk = float(grid.integrate(evaluation.value + regular))
    return gradient_part + params.big_a * bulk


def record(
    state: SimState, config: SolverConfig, evaluation: Optional[ResolventEvaluation] = None
) -> DiagnosticsRecord:
    """
    Diagnostics of one state; depends on the state snapshot only.

    Args:
        state: Current state
        config: Run configuration (potential, alpha, area)
        evaluation: Resolvent of state.phi, recomputed when omitted

    Returns:
        DiagnosticsRecord in CSV column order
    """
    grid = state.grid
    if evaluation is None:
        evaluation = _evaluation(state, config)
    totals = state.conserved_totals()
    phi_mean = grid.mean(state.phi)
    mu_mean = grid.mean(state.mu)
    grad_mu = math.sqrt(grid.dirichlet_energy(state.mu))
    gap = config.lam * float(np.max(np.sqrt(np.sum(evaluation.grad**2, axis=0))))
    mu_norm = math.sqrt(grad_mu**2 + grid.area * float(np.sum(mu_mean**2)))
    t = state.t
    return DiagnosticsRecord(
        t,
        *totals,
        float(state.P.min()),
        float(state.P.max()),
        float(state.R[0].min()),
        float(state.R[0].max()),
        float(state.R[1].min()),
        float(state.R[1].max()),
        float(phi_mean[0]),
        float(phi_mean[1]),
        separation(state.phi, config.potential_variant),
        energy(state, config, evaluation),
        grad_mu,
        float(mu_mean[0]),
        float(mu_mean[1]),
        gap,
        math.sqrt(t) * grad_mu,
        t ** (1.5 - config.alpha) * mu_norm,
    )


def _check_finite(result) -> InvariantCheck:
    finite = all(rec.is_finite() for rec in result.records) and result.state.is_finite()
    return InvariantCheck("finite", finite, "" if finite else "non-finite diagnostics")


def _check_mass(records: Sequence[DiagnosticsRecord]) -> InvariantCheck:
    first = np.array(records[0].mass_columns())
    worst = max(
        float(np.max(np.abs(np.array(rec.mass_columns()) - first))) for rec in records
    )
    return InvariantCheck(
        "mass_balance", worst <= MASS_TOL, f"max drift {worst:.3e}", worst=worst
    )


def _check_min_max(records: Sequence[DiagnosticsRecord], config: SolverConfig) -> InvariantCheck:
    lower = c_star(config.coeffs) - BOUND_SLACK
    upper = 1.0 + BOUND_SLACK
    low = min(min(r.Pmin, r.R1min, r.R2min) for r in records)
    high = max(max(r.Pmax, r.R1max, r.R2max) for r in records)
    passed = low >= lower and high <= upper
    return InvariantCheck(
        "min_max",
        passed,
        f"P, R in [{low:.6g}, {high:.6g}], allowed [{lower:.6g}, {upper:.6g}]",
        asserted=config.lam <= ASSERT_LAMBDA_MAX,
        worst=min(low - lower, upper - high),
    )


def _check_energy(records: Sequence[DiagnosticsRecord], config: SolverConfig) -> InvariantCheck:
    worst = -math.inf
    for prev, curr in zip(records, records[1:]):
        steps = max(1, round((curr.t - prev.t) / config.tau))
        worst = max(worst, curr.energy - prev.energy - ENERGY_SLACK_PER_STEP * steps)
    passed = worst <= 0.0
    detail = "single record" if worst == -math.inf else f"max increase beyond slack {worst:.3e}"
    return InvariantCheck("energy", passed, detail, worst=None if worst == -math.inf else worst)


def evaluate_invariants(result, config: SolverConfig) -> list[InvariantCheck]:
    """
    Evaluate the invariant families on a finished run.

    Args:
        result: RunResult with records and per-step mean samples
        config: The run's configuration

    Returns:
        One InvariantCheck per family that applies to the configuration
    """
    checks = [_check_finite(result)]
    records = result.records
    if records:
        checks.append(_check_mass(records))
        checks.append(_check_min_max(records, config))
    notes = [] if result.admissible else ["resolvent left the admissible set"]
    if result.underflow_cells:
        notes.append(f"{result.underflow_cells} cells resolved in log coordinates only")
    checks.append(InvariantCheck("phase_admissibility", result.admissible, "; ".join(notes)))

    series = MeanSeries.from_samples(result.means) if result.means else None
    if config.reactions and series is not None:
        if len(series) >= 2:
            residual = mean_ode_residual(series, config.coeffs).max_abs
            checks.append(
                InvariantCheck(
                    "mean_ode", residual <= MEAN_ODE_TOL, f"max residual {residual:.3e}",
                    worst=residual,
                )
            )
        report = mean_bounds_check(series, config.coeffs, config.lam)
        failed = [
            name
            for name, ok in (
                ("upper", report.upper_ok),
                ("positivity", report.positivity_ok),
                ("sandwich", report.sandwich_ok),
                ("cap", report.cap_ok),
            )
            if not ok
        ]
        checks.append(
            InvariantCheck(
                "mean_bounds",
                not failed,
                f"failed: {', '.join(failed)}" if failed else
                f"sandwich margin {report.sandwich_margin:.3e}, cap margin {report.cap_margin:.3e}",
                asserted=report.asserted,
                worst=min(report.upper_margin, report.sandwich_margin, report.cap_margin),
            )
        )
    if not config.reactions and records:
        checks.append(_check_energy(records, config))
    return checks


@dataclass
class WeightedProbeSummary:
    alpha: float
    sup_half_gradmu: float  # sup t^(1/2) ||grad mu||
    sup_alpha_mu: float  # sup t^(3/2 - alpha) ||mu||_V proxy

    @property
    def finite(self) -> bool:
        return math.isfinite(self.sup_half_gradmu) and math.isfinite(self.sup_alpha_mu)


def weighted_probes(
    records: Sequence[DiagnosticsRecord], alpha: float, area: float = 1.0
) -> WeightedProbeSummary:
    """
    Suprema of the time-weighted chemical-potential norms over the output times.

    Args:
        records: Output records of a run
        alpha: Weight exponent in (0, 1)
        area: Domain area for the mean part of the V-norm proxy

    Raises:
        ValueError: If alpha is outside (0, 1)
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    sup_half = 0.0
    sup_alpha = 0.0
    for rec in records:
        mu_norm = math.sqrt(rec.grad_mu_l2**2 + area * (rec.mu1_mean**2 + rec.mu2_mean**2))
        sup_half = max(sup_half, math.sqrt(rec.t) * rec.grad_mu_l2)
        sup_alpha = max(sup_alpha, rec.t ** (1.5 - alpha) * mu_norm)
    return WeightedProbeSummary(alpha, sup_half, sup_alpha)


def power_law_exponent(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Slope of the least-squares line through (ln x, ln y), over pairs with x, y > 0.

    Raises:
        ValueError: If fewer than two positive pairs remain
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if np.count_nonzero(keep) < 2 or np.unique(x[keep]).size < 2:
        raise ValueError("power-law fit needs at least two distinct positive points")
    return float(linregress(np.log(x[keep]), np.log(y[keep])).slope)


def _trajectory(config: SolverConfig, P0: np.ndarray) -> list[SimState]:
    """States at every output step of a run started from the given protein field."""
    grid = config.grid
    R0 = 0.5 * (1.0 - P0)
    state = state_from_phases(config, np.zeros((2,) + grid.shape), P0, np.stack([R0, R0]))
    states = [state]
    n_steps = config.n_steps
    for n in range(n_steps):
        state = step(state, config)
        if (n + 1) % config.output_every == 0 or n + 1 == n_steps:
            states.append(state)
    return states


@dataclass
class StabilityReport:
    sigma: float
    perturb_eps: float
    times: list[float] = field(default_factory=list)
    distances: list[float] = field(default_factory=list)  # D(t) for t >= sigma
    d_sigma: float = 0.0
    ratio: float = 1.0  # sup D / D(sigma)


def twin_run_stability(
    config: SolverConfig, sigma: float, perturb_eps: float
) -> StabilityReport:
    """
    Run twin simulations from P0 and a seeded perturbation of it and compare them.

    D(t) is the sum of the discrete L2 distances of phi, P and R. Both runs execute
    concurrently and share nothing but the configuration.

    Raises:
        ValueError: If the variant is not tilde or sigma/perturb_eps are negative
        ValidationError: If the perturbed protein field is not admissible
    """
    if config.potential_variant is not PotentialVariant.TILDE:
        raise ValueError("twin-run stability is only defined for the tilde variant")
    if sigma < 0 or perturb_eps < 0:
        raise ValueError("sigma and perturb_eps must be nonnegative")

    P0 = config.initial_protein()
    rng = np.random.default_rng(config.seed + 1)
    perturbed = P0 + perturb_eps * rng.uniform(-1.0, 1.0, size=P0.shape)
    report = validate_initial(perturbed, config.coeffs)
    if not report.ok:
        raise ValidationError(report.messages)

    logger = get_logger()
    logger.info("Twin runs: sigma=%g, perturbation %g", sigma, perturb_eps)
    with ThreadPoolExecutor(max_workers=2) as pool:
        base_future = pool.submit(_trajectory, config, P0)
        twin_future = pool.submit(_trajectory, config, perturbed)
        base, twin = base_future.result(), twin_future.result()

    grid = config.grid
    out = StabilityReport(sigma=sigma, perturb_eps=perturb_eps)
    for a, b in zip(base, twin):
        if a.t < sigma - 1e-12:
            continue
        distance = (
            grid.l2_norm(a.phi - b.phi) + grid.l2_norm(a.P - b.P) + grid.l2_norm(a.R - b.R)
        )
        out.times.append(a.t)
        out.distances.append(distance)
    if not out.distances:
        raise ValueError(f"no output time at or after sigma = {sigma}")

    out.d_sigma = out.distances[0]
    peak = max(out.distances)
    if peak == 0.0:
        out.ratio = 1.0
    elif out.d_sigma == 0.0:
        out.ratio = math.inf
    else:
        out.ratio = peak / out.d_sigma
    logger.info("Twin runs: D(sigma)=%.3e, ratio %.4g", out.d_sigma, out.ratio)
    return out


@dataclass
class RefinementReport:
    lambdas: list[float]
    gaps: list[float]  # terminal yosida_gap per lambda
    exponent: Optional[float]  # slope of ln gap against ln lambda


def lambda_refinement(config: SolverConfig, lambdas: Sequence[float]) -> RefinementReport:
    """Rerun the coupled system for each lambda and fit gap ~ lambda^exponent."""
    gaps = []
    for lam in lambdas:
        result = run(config.replace(lam=float(lam)))
        gaps.append(result.records[-1].yosida_gap)
    try:
        exponent = power_law_exponent(lambdas, gaps)
    except ValueError:
        exponent = None
    return RefinementReport([float(v) for v in lambdas], gaps, exponent)


@dataclass
class ConvergenceReport:
    taus: list[float]
    terminal_means: list[list[float]]  # (phi1 mean, phi2 mean) per tau
    differences: list[float]  # max component change between consecutive levels
    ratio: float  # differences[0] / differences[1]
    # Joint refinement: grid spacing halved together with tau
    grid_sizes: list[tuple[int, int]] = field(default_factory=list)
    grid_means: list[list[float]] = field(default_factory=list)
    grid_differences: list[float] = field(default_factory=list)
    grid_ratio: Optional[float] = None


def _terminal_means(config: SolverConfig) -> list[float]:
    final = run(config).records[-1]
    return [final.phi1mean, final.phi2mean]


def _successive_ratio(means: list[list[float]]) -> tuple[list[float], float]:
    values = np.array(means)
    differences = [float(np.max(np.abs(a - b))) for a, b in zip(values, values[1:])]
    if differences[1] > 0:
        return differences, differences[0] / differences[1]
    return differences, math.inf if differences[0] > 0 else math.nan


def self_convergence(
    config: SolverConfig, levels: int = 3, refine_grid: bool = True
) -> ConvergenceReport:
    """
    Rerun with tau, tau/2, ... and compare the terminal phase means.

    With ``refine_grid`` a second sequence halves the spacing together with tau
    (nx 2^k by ny 2^k cells at tau / 2^k). A ratio near 2 between consecutive
    differences indicates first order; the joint sequence sees the spatial error too.
    """
    if levels < 3:
        raise ValueError(f"self-convergence needs at least 3 levels, got {levels}")
    logger = get_logger()
    taus = [config.tau / 2**k for k in range(levels)]
    means = [_terminal_means(config.replace(tau=tau)) for tau in taus]
    differences, ratio = _successive_ratio(means)
    report = ConvergenceReport(taus, means, differences, ratio)
    logger.info("Self-convergence in tau: ratio %.4g", ratio)
    if refine_grid:
        report.grid_sizes = [(config.nx * 2**k, config.ny * 2**k) for k in range(levels)]
        report.grid_means = [means[0]] + [
            _terminal_means(config.replace(nx=nx, ny=ny, tau=tau))
            for (nx, ny), tau in zip(report.grid_sizes[1:], taus[1:])
        ]
        report.grid_differences, report.grid_ratio = _successive_ratio(report.grid_means)
        logger.info("Self-convergence in (h, tau): ratio %.4g", report.grid_ratio)
    return report
