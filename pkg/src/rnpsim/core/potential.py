"""Flory-Huggins potential, its Moreau-Yosida regularization and the tilde variant.

Points of the plane are arrays whose first axis has length 2 (the two complex
fractions); any trailing axes are cells and every function is vectorized over them.

The resolvent ``J = (I + lam grad Psi1)^-1`` is computed in logarithmic
coordinates ``a_i = ln p_i``, ``c = ln S``. For a fixed solvent level each
component solves ``x + lam ln x = r_i + lam c`` in closed form through the Wright
omega function, and ``c`` is then found by safeguarded Newton on the monotone
scalar equation ``sum_i x_i(c) + e^c = 1``. Gradients are formed from the logs
(``ln(p_i / S) = a_i - c``), so points far outside the simplex, whose images sit
within ``exp(-1/lam)`` of the boundary, never underflow into ``ln 0``.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp, wrightomega, xlogy

from rnpsim.core.errors import DomainError, NumericalError, StructuralError
from rnpsim.core.models import PotentialParams, PotentialVariant, SimplexPoint

ArrayLike = Union[np.ndarray, SimplexPoint, tuple, list]

RESOLVENT_MAX_ITER = 200
_TINY = 1e-300
_SIMPLEX_SLACK = 1e-14
# Components below the smallest normal float64 are carried by their logarithms only
LOG_UNDERFLOW = float(np.log(np.finfo(float).tiny))
# A solvent below this is lost to rounding in 1 - p1 - p2 and is carried by ln S only
SOLVENT_RESOLUTION = 1e-12
LOG_SOLVENT_RESOLUTION = float(np.log(SOLVENT_RESOLUTION))


def _as_pair(p: ArrayLike) -> np.ndarray:
    if isinstance(p, SimplexPoint):
        return p.as_array()
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0 or arr.shape[0] != 2:
        raise StructuralError(f"expected a pair along the first axis, got shape {arr.shape}")
    return arr


def _scalar_or_array(value: np.ndarray) -> Union[float, np.ndarray]:
    return float(value) if np.ndim(value) == 0 else value


def _solvent(p: np.ndarray) -> np.ndarray:
    return 1.0 - p[0] - p[1]


def _require_closed_simplex(p: np.ndarray) -> None:
    if np.any(p < 0.0) or np.any(_solvent(p) < -_SIMPLEX_SLACK) or not np.all(np.isfinite(p)):
        raise DomainError("point lies outside the closed simplex")


def _require_interior(p: np.ndarray) -> None:
    if np.any(p <= 0.0) or np.any(_solvent(p) <= 0.0) or not np.all(np.isfinite(p)):
        raise DomainError("gradient of the entropy is singular on the simplex boundary")


def truncate(x):
    """Clamp to [0, 1]."""
    return _scalar_or_array(np.clip(np.asarray(x, dtype=float), 0.0, 1.0))


def psi1(p: ArrayLike):
    """Mixing entropy p1 ln p1 + p2 ln p2 + S ln S on the closed simplex (0 ln 0 = 0)."""
    arr = _as_pair(p)
    _require_closed_simplex(arr)
    s = np.maximum(_solvent(arr), 0.0)
    return _scalar_or_array(xlogy(arr[0], arr[0]) + xlogy(arr[1], arr[1]) + xlogy(s, s))


def grad_psi1(p: ArrayLike) -> np.ndarray:
    """Components ln(p_i / S); defined on the open simplex only."""
    arr = _as_pair(p)
    _require_interior(arr)
    s = _solvent(arr)
    return np.log(arr / s)


def hess_psi1(p: ArrayLike) -> np.ndarray:
    """Hessian with shape (2, 2, ...): diag(1/p_i) + 1/S on every entry."""
    arr = _as_pair(p)
    _require_interior(arr)
    inv_s = 1.0 / _solvent(arr)
    return np.array(
        [
            [1.0 / arr[0] + inv_s, inv_s],
            [inv_s, 1.0 / arr[1] + inv_s],
        ]
    )


def psi2_eval(p: ArrayLike, params: PotentialParams) -> tuple:
    """Demixing energy chi12 p1 p2 + chi1S p1 S + chi2S p2 S and its gradient, on all of R^2."""
    arr = _as_pair(p)
    p1, p2 = arr
    s = _solvent(arr)
    value = params.chi12 * p1 * p2 + params.chi1S * p1 * s + params.chi2S * p2 * s
    grad = np.array(
        [
            params.chi12 * p2 + params.chi1S * (s - p1) - params.chi2S * p2,
            params.chi12 * p1 - params.chi1S * p1 + params.chi2S * (s - p2),
        ]
    )
    return _scalar_or_array(value), grad


def psi_eval(p: ArrayLike, params: PotentialParams) -> tuple:
    """Full Flory-Huggins potential (entropy plus demixing) and its gradient."""
    arr = _as_pair(p)
    value2, grad2 = psi2_eval(arr, params)
    return _scalar_or_array(psi1(arr) + value2), grad_psi1(arr) + grad2


def psi1_conjugate(z: ArrayLike):
    """Convex conjugate sup_{r in simplex} z.r - psi1(r) = ln(1 + e^z1 + e^z2)."""
    arr = _as_pair(z)
    stacked = np.concatenate([arr, np.zeros((1,) + arr.shape[1:])], axis=0)
    return _scalar_or_array(logsumexp(stacked, axis=0))


def tilde_psi_eval(p: ArrayLike, params: PotentialParams, with_gradient: bool = True) -> tuple:
    """
    Tilde potential: sum p_i ln p_i on the unit box plus Psi2 + (1 - p1 - p2)(-p1 - p2).

    Args:
        p: Point(s) in the unit box [0, 1]^2
        params: Demixing coefficients
        with_gradient: Also return the gradient, which needs the open box

    Returns:
        (value, gradient) where gradient is None when not requested
    """
    arr = _as_pair(p)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
        raise DomainError("point lies outside the unit box")
    s_sum = arr[0] + arr[1]
    value2, grad2 = psi2_eval(arr, params)
    value = xlogy(arr[0], arr[0]) + xlogy(arr[1], arr[1]) + value2 - (1.0 - s_sum) * s_sum
    if not with_gradient:
        return _scalar_or_array(value), None
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("gradient of the tilde entropy needs the open unit box")
    grad = np.log(arr) + 1.0 + grad2 + (2.0 * s_sum - 1.0)
    return _scalar_or_array(value), grad


def regular_part_eval(p: np.ndarray, params: PotentialParams) -> tuple:
    """Lipschitz part of the potential for the selected variant: value and gradient."""
    value, grad = psi2_eval(p, params)
    if params.variant is PotentialVariant.TILDE:
        s_sum = p[0] + p[1]
        value = value - (1.0 - s_sum) * s_sum
        grad = grad + (2.0 * s_sum - 1.0)
    return value, grad


def _component_solution(s: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve x + lam ln x = s for x > 0; returns (x, ln x)."""
    z = s / lam - np.log(lam)
    omega = np.real(wrightomega(z))
    with np.errstate(divide="ignore"):
        log_omega = np.where(omega > _TINY, np.log(np.maximum(omega, _TINY)), z - omega)
    return lam * omega, np.log(lam) + log_omega


def resolvent_logs(
    r: np.ndarray, lam: float, log_solvent_guess: Optional[np.ndarray] = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Simplex resolvent in logarithmic coordinates for k = r.shape[0] components.

    Solves x_i + lam ln(x_i / S) = r_i with S = 1 - sum x_i > 0.

    Args:
        r: Array of shape (k, ...)
        lam: Yosida parameter, positive
        log_solvent_guess: Starting ln S per cell, e.g. from a nearby argument

    Returns:
        (x, ln x, ln S) with shapes (k, ...), (k, ...), (...)

    Raises:
        NumericalError: If the solvent level does not converge
    """
    if lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise NumericalError("resolvent argument contains non-finite values")
    k = r.shape[0]
    log_q = np.log(1.0 / (k + 1))
    # at c = lo every component and the solvent sit below 1/(k+1), so the sum is < 1
    lo = np.minimum(log_q, np.min((1.0 / (k + 1) + lam * log_q - r) / lam, axis=0)) - 1.0
    hi = np.zeros_like(lo)
    if log_solvent_guess is not None and np.shape(log_solvent_guess) == lo.shape:
        c = np.clip(np.nan_to_num(log_solvent_guess, nan=log_q), lo, hi)
    else:
        c = np.full_like(lo, log_q)

    g = np.zeros_like(lo)
    for iteration in range(1, RESOLVENT_MAX_ITER + 1):
        x, _ = _component_solution(r + lam * c, lam)
        solvent = np.exp(c)
        g = x.sum(axis=0) + solvent - 1.0
        lo = np.where(g < 0.0, c, lo)
        hi = np.where(g > 0.0, c, hi)
        slope = np.sum(lam * x / (x + lam), axis=0) + solvent
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = c - g / slope
        outside = ~((newton > lo) & (newton < hi))
        c_next = np.where(outside, 0.5 * (lo + hi), newton)
        scale = 1.0 + np.abs(c)
        done = (np.abs(c_next - c) <= 1e-15 * scale) | (g == 0.0) | (hi - lo <= 1e-15 * scale)
        c = c_next
        if np.all(done):
            break
    else:
        raise NumericalError(
            "simplex resolvent did not converge",
            residual=float(np.max(np.abs(g))),
            iterations=RESOLVENT_MAX_ITER,
        )
    x, a = _component_solution(r + lam * c, lam)
    return x, a, c


def _tilde_logs(r: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Componentwise resolvent of the box entropy; clamped where r_i >= 1 + lam."""
    if lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise NumericalError("resolvent argument contains non-finite values")
    x, a = _component_solution(r - lam, lam)
    clamped = r >= 1.0 + lam
    return np.where(clamped, 1.0, x), np.where(clamped, 0.0, a), clamped


@dataclass
class ResolventEvaluation:
    """Resolvent of r together with everything the Yosida maps derive from it."""

    r: np.ndarray
    lam: float
    variant: PotentialVariant
    point: np.ndarray  # J(r), shape (2, ...)
    log_point: np.ndarray  # ln J(r)
    log_solvent: Optional[np.ndarray]  # ln S at J(r); Flory-Huggins only
    clamped: Optional[np.ndarray]  # tilde only: component on the face p_i = 1

    @property
    def grad(self) -> np.ndarray:
        """Yosida gradient (r - J)/lam, evaluated as the entropy gradient at J."""
        if self.variant is PotentialVariant.FLORY_HUGGINS:
            return self.log_point - self.log_solvent
        return np.where(self.clamped, (self.r - 1.0) / self.lam, self.log_point + 1.0)

    @property
    def value(self) -> np.ndarray:
        """Moreau envelope |r - J|^2 / (2 lam) + entropy(J)."""
        grad = self.grad
        distance = 0.5 * self.lam * np.sum(grad**2, axis=0)
        entropy = np.sum(self.point * self.log_point, axis=0)
        if self.variant is PotentialVariant.FLORY_HUGGINS:
            entropy = entropy + np.exp(self.log_solvent) * self.log_solvent
        return distance + entropy

    @property
    def jacobian(self) -> np.ndarray:
        """Derivative of the Yosida gradient, shape (2, 2, ...): (H^-1(J) + lam I)^-1."""
        x1, x2 = self.point
        lam = self.lam
        if self.variant is PotentialVariant.TILDE:
            inv_h = np.where(self.clamped, 0.0, self.point)
            diag = 1.0 / (inv_h + lam)
            zero = np.zeros_like(x1)
            return np.array([[diag[0], zero], [zero, diag[1]]])
        s = np.exp(self.log_solvent)
        m11 = x1 * (x2 + s) + lam
        m22 = x2 * (x1 + s) + lam
        m12 = -x1 * x2
        # m11 m22 - m12^2 with the x1 x2 cross terms cancelled analytically
        det = x1 * x2 * s + lam * (x1 * (x2 + s) + x2 * (x1 + s)) + lam**2
        return np.array([[m22, -m12], [-m12, m11]]) / det

    def residual(self) -> np.ndarray:
        """Defect of J + lam grad(J) = r per cell, plus the simplex constraint defect."""
        if self.variant is PotentialVariant.FLORY_HUGGINS:
            equation = self.point + self.lam * (self.log_point - self.log_solvent) - self.r
            constraint = np.abs(self.point.sum(axis=0) + np.exp(self.log_solvent) - 1.0)
            return np.sqrt(np.sum(equation**2, axis=0)) + constraint
        free = np.abs(self.point + self.lam * (self.log_point + 1.0) - self.r)
        # on the face the normal cone requires r_i - 1 - lam >= 0
        cone = np.maximum(0.0, 1.0 + self.lam - self.r)
        return np.sqrt(np.sum(np.where(self.clamped, cone, free) ** 2, axis=0))

    def underflow_mask(self) -> np.ndarray:
        """Cells where J sits closer to the boundary than float64 resolves."""
        deep = np.any(self.log_point < LOG_UNDERFLOW, axis=0)
        if self.variant is PotentialVariant.FLORY_HUGGINS:
            deep = deep | (self.log_solvent < LOG_SOLVENT_RESOLUTION)
        return deep

    def underflow_count(self) -> int:
        return int(np.count_nonzero(self.underflow_mask()))

    def is_admissible(self) -> bool:
        """
        J strictly inside the simplex (the unit box for tilde, faces p_i = 1 allowed).

        Cells in ``underflow_mask`` are judged on their logarithms, which must be
        finite, and may round onto the boundary; every other cell must have
        positive components and, for Flory-Huggins, a positive 1 - p1 - p2.
        """
        point = self.point
        if not (np.all(np.isfinite(point)) and np.all(np.isfinite(self.log_point))):
            return False
        positive = (point > 0.0) | ((point >= 0.0) & (self.log_point < LOG_UNDERFLOW))
        if not np.all(positive):
            return False
        if self.variant is PotentialVariant.TILDE:
            return bool(np.all(point <= 1.0))
        if not np.all(np.isfinite(self.log_solvent)):
            return False
        solvent = 1.0 - point.sum(axis=0)
        deep = self.log_solvent < LOG_SOLVENT_RESOLUTION
        inside = np.where(deep, solvent >= -_SIMPLEX_SLACK, solvent > 0.0)
        return bool(np.all(inside))


def evaluate_resolvent(
    r: ArrayLike,
    lam: float,
    variant: PotentialVariant,
    hint: Optional[ResolventEvaluation] = None,
) -> ResolventEvaluation:
    """
    Resolvent of r with the data the Yosida maps need.

    ``hint`` is an evaluation at a nearby argument; its solvent level starts the
    Flory-Huggins solve, which then needs only a few Newton corrections.
    """
    arr = _as_pair(r)
    if variant is PotentialVariant.FLORY_HUGGINS:
        guess = None
        if hint is not None and hint.variant is variant and hint.lam == lam:
            guess = hint.log_solvent
        x, a, c = resolvent_logs(arr, lam, guess)
        return ResolventEvaluation(arr, lam, variant, x, a, c, None)
    x, a, clamped = _tilde_logs(arr, lam)
    return ResolventEvaluation(arr, lam, variant, x, a, None, clamped)


def resolvent(
    r: ArrayLike, lam: float, variant: PotentialVariant = PotentialVariant.FLORY_HUGGINS
) -> np.ndarray:
    """J_lam(r) = (I + lam grad Psi1)^-1 r, shape (2, ...)."""
    return evaluate_resolvent(r, lam, variant).point


def resolvent_residual(
    r: ArrayLike, lam: float, variant: PotentialVariant = PotentialVariant.FLORY_HUGGINS
) -> np.ndarray:
    return evaluate_resolvent(r, lam, variant).residual()


def yosida_grad(
    r: ArrayLike, lam: float, variant: PotentialVariant = PotentialVariant.FLORY_HUGGINS
) -> np.ndarray:
    """Gradient of the Moreau-Yosida regularization, (r - J(r)) / lam."""
    return evaluate_resolvent(r, lam, variant).grad


def yosida_value(
    r: ArrayLike, lam: float, variant: PotentialVariant = PotentialVariant.FLORY_HUGGINS
):
    return _scalar_or_array(evaluate_resolvent(r, lam, variant).value)


def yosida_jacobian(
    r: ArrayLike, lam: float, variant: PotentialVariant = PotentialVariant.FLORY_HUGGINS
) -> np.ndarray:
    return evaluate_resolvent(r, lam, variant).jacobian
