"""Time stepping for the Yosida-regularized phase-field / reaction-diffusion system.

One step from level n:

* resolvent J(phi^n) and the sources are evaluated once and shared;
* phase fields: convex splitting, implicit in -eps^2 lap phi and the Yosida gradient,
  explicit in the Lipschitz part of the potential and in the sources, solved by
  Newton on phi with mu eliminated, each update by GMRES preconditioned in the
  cosine basis of the Laplacian;
* protein and RNA: backward-Euler diffusion with the explicit truncated sources.

Both sub-steps end by shifting each field by a constant so its mean equals the
exact discrete balance ``mean(X^n) + tau mean(S_X)``; the shift is of roundoff size.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.fft import dctn, idctn
from scipy.sparse.linalg import LinearOperator, factorized, gmres, spsolve

from rnpsim.config.logging import get_logger
from rnpsim.config.settings import SolverConfig
from rnpsim.core.errors import NumericalError, ValidationError
from rnpsim.core.grid import Grid
from rnpsim.core.models import (
    DiagnosticsRecord,
    InvariantCheck,
    MeanSample,
    SimState,
)
from rnpsim.core.potential import ResolventEvaluation, evaluate_resolvent, regular_part_eval
from rnpsim.core.reactions import Sources, sources, validate_coeffs, validate_initial

# Halvings allowed in the Newton line search
MAX_DAMPING_STEPS = 8
# Relative residual of the preconditioned Krylov solve inside each Newton update
KRYLOV_RTOL = 1e-10
KRYLOV_RESTART = 40
KRYLOV_CYCLES = 3


@dataclass(frozen=True)
class _Operators:
    laplacian: sp.csr_matrix
    bilaplacian: sp.csr_matrix
    diffusion_solve: Callable[[np.ndarray], np.ndarray]  # (I - tau lap)^-1


@lru_cache(maxsize=8)
def step_operators(grid: Grid, tau: float) -> _Operators:
    lap = grid.laplacian_matrix()
    identity = sp.identity(grid.size, format="csc")
    return _Operators(
        laplacian=lap,
        bilaplacian=(lap @ lap).tocsr(),
        diffusion_solve=factorized((identity - tau * lap).tocsc()),
    )


def discrete_l2(grid: Grid, values: np.ndarray) -> float:
    return float(np.sqrt(np.sum(values**2) * grid.cell_area))


def project_means(values: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Shift each component (leading axes) so its mean over the cells equals target."""
    defect = target - values.mean(axis=(-2, -1))
    return values + np.expand_dims(defect, (-2, -1))


def check_finite(name: str, values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"non-finite values in {name}")


def solve_newton(
    x0: np.ndarray,
    residual: Callable[[np.ndarray], tuple[np.ndarray, Any]],
    jacobian: Callable[[Any], sp.spmatrix],
    grid: Grid,
    tol: float,
    max_iter: int,
    what: str,
    linear_solve: Optional[Callable[[Any, np.ndarray], np.ndarray]] = None,
) -> tuple[np.ndarray, Any]:
    """
    Damped Newton iteration on the flattened unknowns x0.

    Args:
        x0: Initial iterate (any shape, flattened for the linear solves)
        residual: x -> (F(x), aux) with F shaped like x
        jacobian: aux -> sparse dF/dx at the iterate aux was computed for
        grid: Grid defining the discrete L2 norm of the residual
        tol: Residual tolerance
        max_iter: Largest number of Newton updates
        what: Name of the unknowns for log and error messages
        linear_solve: (aux, rhs) -> solution of dF/dx d = rhs; a sparse direct
            solve of ``jacobian(aux)`` when omitted

    Returns:
        (converged iterate, aux at that iterate)

    Raises:
        NumericalError: On non-convergence, line-search failure or non-finite updates
    """
    logger = get_logger()
    x = x0.copy()
    res, aux = residual(x)
    norm = discrete_l2(grid, res)
    iterations = 0
    while norm > tol:
        if iterations >= max_iter:
            raise NumericalError(f"Newton iteration for the {what} did not converge",
                                 residual=norm, iterations=iterations)
        iterations += 1
        if linear_solve is None:
            delta = spsolve(jacobian(aux).tocsc(), -res.reshape(-1))
        else:
            delta = linear_solve(aux, -res.reshape(-1))
        delta = delta.reshape(x.shape)
        check_finite("Newton update", delta)

        damping = 1.0
        for _ in range(MAX_DAMPING_STEPS + 1):
            trial = x + damping * delta
            trial_res, trial_aux = residual(trial)
            trial_norm = discrete_l2(grid, trial_res)
            if trial_norm < norm or trial_norm <= tol:
                break
            damping *= 0.5
        else:
            raise NumericalError(f"Newton line search failed for the {what}",
                                 residual=norm, iterations=iterations)
        if damping < 1.0:
            logger.debug("Newton step %d damped by %g", iterations, damping)
        x, res, aux, norm = trial, trial_res, trial_aux, trial_norm

    logger.debug("%s Newton converged in %d iterations (residual %.2e)", what, iterations, norm)
    return x, aux


def chemical_potential(
    phi: np.ndarray,
    phi_explicit: np.ndarray,
    config: SolverConfig,
    evaluation: Optional[ResolventEvaluation] = None,
) -> np.ndarray:
    """mu = -eps^2 lap phi + A (yosida_grad(phi) + grad Psi2(phi_explicit))."""
    params = config.potential
    if evaluation is None:
        evaluation = evaluate_resolvent(phi, params.lam, params.variant)
    _, regular_grad = regular_part_eval(phi_explicit, params)
    lap = config.grid.apply_laplacian(phi)
    return -params.eps**2 * lap + params.big_a * (evaluation.grad + regular_grad)


def state_from_phases(
    config: SolverConfig, phi: np.ndarray, P: np.ndarray, R: np.ndarray, t: float = 0.0
) -> SimState:
    """State with the given fields and the chemical potential consistent with them."""
    grid = config.grid
    phi = np.array(phi, dtype=float)
    P = np.array(P, dtype=float)
    R = np.array(R, dtype=float)
    grid.check_shape(phi)
    grid.check_shape(P)
    grid.check_shape(R)
    mu = chemical_potential(phi, phi, config)
    return SimState(t=t, phi=phi, mu=mu, P=P, R=R, grid=grid)


def init_state(config: SolverConfig) -> SimState:
    """
    Initial state with no complexes: phi = 0, P = P0, R1 = R2 = (1 - P0) / 2.

    Raises:
        ValidationError: If the rates or the initial protein field are invalid
    """
    coeffs = config.coeffs
    report = validate_coeffs(coeffs)
    if not report.ok:
        raise ValidationError(report.messages)
    P0 = config.initial_protein()
    report = validate_initial(P0, coeffs)
    if not report.ok:
        raise ValidationError(report.messages)

    grid = config.grid
    phi = np.zeros((2,) + grid.shape)
    R0 = 0.5 * (1.0 - P0)
    return state_from_phases(config, phi, P0, np.stack([R0, R0.copy()]))


def step_sources(
    state: SimState, config: SolverConfig, evaluation: ResolventEvaluation
) -> Sources:
    return sources(
        evaluation.point,
        state.P,
        state.R,
        config.coeffs,
        truncated=config.truncated,
        enabled=config.reactions,
    )


def mode_solver(
    grid: Grid, tau: float, eps2: float, big_a: float, coupling: np.ndarray
) -> Callable[[np.ndarray], np.ndarray]:
    """
    Exact inverse of v -> v + tau eps^2 lap^2 v - tau A lap (C v) for a constant 2x2 C.

    Every cosine mode of the Neumann Laplacian decouples into a 2x2 system, solved
    in closed form; unknowns are flattened component-major like the phase fields.
    """
    ell = grid.laplacian_eigenvalues()
    a = 1.0 + tau * eps2 * ell**2
    b = tau * big_a * ell
    m00 = a - b * coupling[0, 0]
    m01 = -b * coupling[0, 1]
    m10 = -b * coupling[1, 0]
    m11 = a - b * coupling[1, 1]
    det = m00 * m11 - m01 * m10
    shape = (2,) + grid.shape

    def solve(rhs: np.ndarray) -> np.ndarray:
        hat = dctn(np.reshape(rhs, shape), type=2, norm="ortho", axes=(1, 2))
        out = np.stack([m11 * hat[0] - m01 * hat[1], m00 * hat[1] - m10 * hat[0]]) / det
        return idctn(out, type=2, norm="ortho", axes=(1, 2)).reshape(-1)

    return solve


def phase_linear_solver(
    config: SolverConfig, jacobian: Callable[[ResolventEvaluation], sp.spmatrix]
) -> Callable[[ResolventEvaluation, np.ndarray], np.ndarray]:
    """
    Newton linear solve for the phase fields: GMRES on the matrix-free Jacobian,
    preconditioned by ``mode_solver`` with the cell-averaged Yosida Hessian.

    Falls back to a sparse direct solve of ``jacobian(evaluation)`` when GMRES
    stalls, e.g. for a strongly varying Hessian.
    """
    grid = config.grid
    params = config.potential
    tau = config.tau
    ops = step_operators(grid, tau)
    n = grid.size
    eps2 = params.eps**2

    def solve(evaluation: ResolventEvaluation, rhs: np.ndarray) -> np.ndarray:
        coupling = evaluation.jacobian.reshape(2, 2, n)

        def matvec(v: np.ndarray) -> np.ndarray:
            v = np.reshape(v, (2, n))
            w = np.einsum("abk,bk->ak", coupling, v)
            out = (
                v.T
                + tau * eps2 * (ops.bilaplacian @ v.T)
                - tau * params.big_a * (ops.laplacian @ w.T)
            )
            return out.T.reshape(-1)

        operator = LinearOperator((2 * n, 2 * n), matvec=matvec, dtype=float)
        precond = LinearOperator(
            (2 * n, 2 * n),
            matvec=mode_solver(grid, tau, eps2, params.big_a, coupling.mean(axis=-1)),
            dtype=float,
        )
        x, info = gmres(
            operator, rhs, rtol=KRYLOV_RTOL, atol=0.0, restart=KRYLOV_RESTART,
            maxiter=KRYLOV_CYCLES, M=precond,
        )
        if info != 0 or not np.all(np.isfinite(x)):
            get_logger().debug("GMRES stalled (info=%d), using a direct solve", info)
            return spsolve(jacobian(evaluation).tocsc(), rhs)
        return x

    return solve


def ch_step(
    state: SimState,
    config: SolverConfig,
    src: Optional[Sources] = None,
    evaluation: Optional[ResolventEvaluation] = None,
    direct_solve: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """
    One convex-splitting step for (phi, mu).

    Solves  phi - phi^n = tau lap mu + tau S_phi,
            mu = -eps^2 lap phi + A (yosida_grad(phi) + grad Psi2(phi^n))
    by Newton on F(phi) = phi + tau eps^2 lap^2 phi - tau A lap yosida_grad(phi)
    - tau A lap grad Psi2(phi^n) - phi^n - tau S_phi.

    Args:
        state: Current state
        config: Run configuration
        src: Sources at level n; evaluated from the state when omitted
        evaluation: Resolvent at phi^n, used to warm-start the iterates
        direct_solve: Use sparse direct Newton solves instead of preconditioned GMRES

    Returns:
        (phi^{n+1}, mu^{n+1}), each of shape (2, nx, ny)

    Raises:
        NumericalError: On Newton failure or non-finite iterates
    """
    grid = config.grid
    params = config.potential
    tau = config.tau
    ops = step_operators(grid, tau)
    n = grid.size

    if evaluation is None:
        evaluation = evaluate_resolvent(state.phi, params.lam, params.variant)
    if src is None:
        src = step_sources(state, config, evaluation)

    phi_n = state.phi.reshape(2, n)
    _, regular_grad = regular_part_eval(state.phi, params)
    rhs = phi_n + tau * src.phi.reshape(2, n)
    explicit = ops.laplacian @ (params.big_a * regular_grad.reshape(2, n)).T
    hint = evaluation

    def residual(x: np.ndarray) -> tuple[np.ndarray, ResolventEvaluation]:
        nonlocal hint
        hint = evaluate_resolvent(
            x.reshape((2,) + grid.shape), params.lam, params.variant, hint=hint
        )
        grad = hint.grad.reshape(2, n)
        value = (
            x.T
            + tau * params.eps**2 * (ops.bilaplacian @ x.T)
            - tau * params.big_a * (ops.laplacian @ grad.T)
            - tau * explicit
            - rhs.T
        )
        return value.T, hint

    lap_block = sp.block_diag([ops.laplacian, ops.laplacian], format="csr")
    linear_part = sp.identity(2 * n, format="csr") + tau * params.eps**2 * sp.block_diag(
        [ops.bilaplacian, ops.bilaplacian], format="csr"
    )

    def jacobian(current: ResolventEvaluation) -> sp.spmatrix:
        jac = current.jacobian.reshape(2, 2, n)
        yosida_block = sp.bmat(
            [[sp.diags(jac[0, 0]), sp.diags(jac[0, 1])],
             [sp.diags(jac[1, 0]), sp.diags(jac[1, 1])]],
            format="csr",
        )
        return linear_part - tau * params.big_a * (lap_block @ yosida_block)

    x, converged = solve_newton(
        phi_n, residual, jacobian, grid, config.newton_tol, config.newton_max_iter,
        "phase fields",
        linear_solve=None if direct_solve else phase_linear_solver(config, jacobian),
    )
    target = state.phi.mean(axis=(-2, -1)) + tau * src.phi.mean(axis=(-2, -1))
    phi_new = project_means(x.reshape((2,) + grid.shape), target)
    check_finite("phase fields", phi_new)
    final = evaluate_resolvent(phi_new, params.lam, params.variant, hint=converged)
    mu_new = chemical_potential(phi_new, state.phi, config, final)
    return phi_new, mu_new


def rd_step(
    state: SimState,
    config: SolverConfig,
    src: Optional[Sources] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Backward-Euler diffusion with explicit sources for P and R.

    Returns:
        (P^{n+1}, R^{n+1}) with R of shape (2, nx, ny)
    """
    grid = config.grid
    params = config.potential
    tau = config.tau
    if src is None:
        src = step_sources(state, config, evaluate_resolvent(state.phi, params.lam, params.variant))
    solve = step_operators(grid, tau).diffusion_solve

    def advance(values: np.ndarray, source: np.ndarray) -> np.ndarray:
        rhs = values + tau * source
        out = solve(rhs.reshape(grid.size)).reshape(grid.shape)
        return project_means(out, np.asarray(rhs.mean()))

    P_new = advance(state.P, src.P)
    R_new = np.stack([advance(state.R[i], src.R[i]) for i in range(2)])
    check_finite("protein/RNA fields", P_new)
    check_finite("protein/RNA fields", R_new)
    return P_new, R_new


def _advance(
    state: SimState, config: SolverConfig, evaluation: ResolventEvaluation
) -> SimState:
    src = step_sources(state, config, evaluation)
    phi, mu = ch_step(state, config, src, evaluation)
    P, R = rd_step(state, config, src)
    index = state.step_index + 1
    return SimState(
        t=index * config.tau, phi=phi, mu=mu, P=P, R=R, grid=state.grid, step_index=index
    )


def step(state: SimState, config: SolverConfig) -> SimState:
    """Advance one time step; sources are frozen at level n for both sub-steps."""
    params = config.potential
    return _advance(state, config, evaluate_resolvent(state.phi, params.lam, params.variant))


def mean_sample(
    state: SimState, evaluation: ResolventEvaluation, truncated: bool = True
) -> MeanSample:
    """Spatial means entering the mean-value balance at the state's time level."""
    grid = state.grid
    if truncated:
        hP, hR = np.clip(state.P, 0.0, 1.0), np.clip(state.R, 0.0, 1.0)
    else:
        hP, hR = state.P, state.R
    y = grid.mean(state.phi)
    f = grid.mean(hP * hR)
    j = grid.mean(evaluation.point)
    r = grid.mean(state.R)
    return MeanSample(
        t=state.t,
        y1=float(y[0]), y2=float(y[1]),
        f1=float(f[0]), f2=float(f[1]),
        jmean1=float(j[0]), jmean2=float(j[1]),
        pmean=float(grid.mean(state.P)),
        rmean1=float(r[0]), rmean2=float(r[1]),
    )


@dataclass
class RunResult:
    """Everything a coupled run produced."""

    state: SimState
    records: list[DiagnosticsRecord] = field(default_factory=list)
    means: list[MeanSample] = field(default_factory=list)
    admissible: bool = True
    underflow_cells: int = 0  # most cells resolved in log coordinates only, over records
    invariants: list[InvariantCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.invariants if check.asserted)


def run(config: SolverConfig, sink=None) -> RunResult:
    """
    Integrate from the initial state until t >= T_final.

    Records go to the sink every ``output_every`` steps and at the final step,
    snapshots every ``snapshot_every`` steps; mean samples are kept every step.

    Args:
        config: Run configuration
        sink: Optional DirectorySink or MemorySink receiving records, samples and snapshots

    Returns:
        RunResult with the final state and the evaluated invariant families

    Raises:
        NumericalError: After flushing the sink, when a step fails
    """
    from rnpsim.core.diagnostics import evaluate_invariants, record

    logger = get_logger()
    params = config.potential
    state = init_state(config)
    result = RunResult(state=state)
    n_steps = config.n_steps
    logger.info(
        "Run start: %dx%d grid, tau=%.3e, %d steps, variant=%s, lambda=%g",
        config.nx, config.ny, config.tau, n_steps, config.variant, config.lam,
    )

    def emit(current: SimState, evaluation: ResolventEvaluation) -> None:
        rec = record(current, config, evaluation)
        result.records.append(rec)
        result.admissible = result.admissible and evaluation.is_admissible()
        result.underflow_cells = max(result.underflow_cells, evaluation.underflow_count())
        if sink is not None:
            sink.on_record(rec)

    def sample(current: SimState, evaluation: ResolventEvaluation) -> None:
        mean = mean_sample(current, evaluation, config.truncated)
        result.means.append(mean)
        if sink is not None:
            sink.on_sample(mean)

    try:
        evaluation = evaluate_resolvent(state.phi, params.lam, params.variant)
        emit(state, evaluation)
        if sink is not None and config.snapshot_every:
            sink.on_snapshot(state)
        for n in range(n_steps):
            sample(state, evaluation)
            state = _advance(state, config, evaluation)
            evaluation = evaluate_resolvent(
                state.phi, params.lam, params.variant, hint=evaluation
            )
            done = n + 1 == n_steps
            if (n + 1) % config.output_every == 0 or done:
                emit(state, evaluation)
                logger.info("t=%.5f mass=%.15f", state.t, result.records[-1].mass_total)
            if sink is not None and config.snapshot_every and (
                (n + 1) % config.snapshot_every == 0 or done
            ):
                sink.on_snapshot(state)
        sample(state, evaluation)
    except NumericalError:
        logger.warning("Numerical failure at step %d (t=%.5f)", state.step_index, state.t)
        if sink is not None:
            sink.flush()
        raise

    result.state = state
    result.invariants = evaluate_invariants(result, config)
    for check in result.invariants:
        if check.asserted and not check.passed:
            logger.warning("Invariant %s failed: %s", check.name, check.detail)
    if sink is not None:
        sink.flush()
    logger.info("Run end: t=%.5f, %d records", state.t, len(result.records))
    return result
