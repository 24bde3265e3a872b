"""Complex formation sources, rate/initial-data validation and the separation threshold."""

import math
from typing import NamedTuple, Optional

import numpy as np

from rnpsim.core.errors import StructuralError
from rnpsim.core.grid import Field, Grid
from rnpsim.core.models import ReactionCoeffs, ValidationReport
from rnpsim.core.potential import truncate

# Slack for the equality case of the initial-data bound
_BOUND_SLACK = 1e-12


class Sources(NamedTuple):
    """Source terms; ``phi`` and ``R`` have a leading component axis of length 2."""

    phi: np.ndarray
    P: np.ndarray
    R: np.ndarray


def separation_threshold(c: ReactionCoeffs) -> float:
    """(c2 + c4) / min{c1, c3}."""
    return (c.c2 + c.c4) / min(c.c1, c.c3)


def validate_coeffs(c: ReactionCoeffs) -> ValidationReport:
    """Positivity of every rate and min{c1, c3} > c2 + c4."""
    messages = []
    for name in ("c1", "c2", "c3", "c4"):
        value = getattr(c, name)
        if not value > 0:
            messages.append(f"positivity of {name} violated: {name} = {value}")
    if messages:
        return ValidationReport(messages)

    formation = min(c.c1, c.c3)
    dissociation = c.c2 + c.c4
    if not formation > dissociation:
        messages.append(
            f"rate condition min(c1, c3) > c2 + c4 violated: {formation:g} <= {dissociation:g}"
        )
    if not c.T_final >= 0:
        messages.append(f"T_final must be nonnegative, got {c.T_final}")
    if not c.area > 0:
        messages.append(f"area must be positive, got {c.area}")
    return ValidationReport(messages)


def validate_initial(P0, c: ReactionCoeffs) -> ValidationReport:
    """
    Check 0 <= P0 <= 1 and ||P0 - 1/2||_inf <= (1 - (c2 + c4)/min{c1, c3}) / 2.

    Args:
        P0: Initial protein field (Field or array)
        c: Reaction coefficients

    Returns:
        ValidationReport naming each violated bound
    """
    values = P0.values if isinstance(P0, Field) else np.asarray(P0, dtype=float)
    messages = []
    if not np.all(np.isfinite(values)):
        return ValidationReport(["initial protein field contains non-finite values"])
    low, high = float(values.min()), float(values.max())
    if low < 0.0:
        messages.append(f"nonnegativity of P0 violated: min P0 = {low:g}")
    if high > 1.0:
        messages.append(f"P0 <= 1 violated: max P0 = {high:g}")

    deviation = float(np.max(np.abs(values - 0.5)))
    allowed = 0.5 * (1.0 - separation_threshold(c))
    if deviation > allowed + _BOUND_SLACK:
        messages.append(
            f"initial deviation bound violated: ||P0 - 1/2|| = {deviation:g} > {allowed:g}"
        )
    return ValidationReport(messages)


def sources(
    phiJ: np.ndarray,
    P: np.ndarray,
    R: np.ndarray,
    c: ReactionCoeffs,
    truncated: bool = True,
    enabled: bool = True,
) -> Sources:
    """
    Bilinear-minus-linear sources S_phi, S_P = -(S_phi1 + S_phi2), S_R = -S_phi.

    Args:
        phiJ: Phase fractions after the resolvent, shape (2, ...)
        P: Free protein, shape (...)
        R: RNA species, shape (2, ...)
        c: Reaction coefficients
        truncated: Clamp P and R to [0, 1] inside the formation term
        enabled: When False every source is zero

    Returns:
        Sources whose cancellation identities hold bit-exactly
    """
    phiJ = np.asarray(phiJ, dtype=float)
    P = np.asarray(P, dtype=float)
    R = np.asarray(R, dtype=float)
    if phiJ.shape[0] != 2 or R.shape != phiJ.shape or P.shape != phiJ.shape[1:]:
        raise StructuralError(
            f"source inputs disagree: phi {phiJ.shape}, P {P.shape}, R {R.shape}"
        )
    if not enabled:
        zeros = np.zeros_like(phiJ)
        return Sources(zeros, np.zeros_like(P), np.zeros_like(R))

    if truncated:
        hP, hR = truncate(P), truncate(R)
    else:
        hP, hR = P, R
    formation = np.array([c.c1, c.c3]).reshape((2,) + (1,) * P.ndim)
    dissociation = np.array([c.c2, c.c4]).reshape((2,) + (1,) * P.ndim)
    s_phi = formation * hP * hR - dissociation * phiJ
    return Sources(s_phi, -(s_phi[0] + s_phi[1]), -s_phi)


def c_star(
    c: ReactionCoeffs, T_final: Optional[float] = None, area: Optional[float] = None
) -> float:
    """Lower bound for P and R: (c2+c4) / (2 min{c1,c3}) / max{4, e^{(c1+c3)T} |area|^(1/2)}."""
    T = c.T_final if T_final is None else T_final
    omega = c.area if area is None else area
    growth = max(4.0, math.exp((c.c1 + c.c3) * T) * math.sqrt(omega))
    return (c.c2 + c.c4) / (2.0 * min(c.c1, c.c3)) / growth


def initial_profile(
    grid: Grid,
    const: float = 0.5,
    amp: float = 0.0,
    kx: int = 1,
    ky: int = 1,
    noise: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Free-protein initial datum: constant plus a Neumann cosine mode plus seeded noise."""
    x, y = grid.centers()
    profile = const + amp * np.cos(kx * np.pi * x / grid.lx) * np.cos(ky * np.pi * y / grid.ly)
    if noise:
        rng = np.random.default_rng(seed)
        profile = profile + noise * rng.uniform(-1.0, 1.0, size=grid.shape)
    return np.asarray(profile, dtype=float)
