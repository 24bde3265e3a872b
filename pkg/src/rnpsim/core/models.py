"""Core domain models - dataclasses with no I/O dependencies."""

import math
from dataclasses import astuple, dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from rnpsim.core.grid import Field, Grid


class PotentialVariant(Enum):
    """Which convex entropy drives the phase fields."""

    FLORY_HUGGINS = "flory_huggins"  # three-phase entropy on the Gibbs simplex
    TILDE = "tilde"  # decoupled entropy on the unit box plus a quadratic correction


@dataclass(frozen=True)
class SimplexPoint:
    """Volume fractions (p1, p2) of the two complexes; the solvent is 1 - p1 - p2."""

    p1: float
    p2: float

    @property
    def solvent(self) -> float:
        return 1.0 - self.p1 - self.p2

    def is_admissible(self) -> bool:
        """Closed simplex: nonnegative fractions summing to at most one."""
        return self.p1 >= 0.0 and self.p2 >= 0.0 and self.solvent >= 0.0

    def is_interior(self) -> bool:
        return self.p1 > 0.0 and self.p2 > 0.0 and self.solvent > 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2])


@dataclass(frozen=True)
class PotentialParams:
    """Demixing coefficients, Yosida parameter and potential variant."""

    chi12: float = 1.0
    chi1S: float = 1.0
    chi2S: float = 1.0
    lam: float = 1e-3  # Yosida parameter
    variant: PotentialVariant = PotentialVariant.FLORY_HUGGINS
    eps: float = 1.0  # interface thickness
    big_a: float = 1.0  # potential scaling

    def validate(self) -> list[str]:
        """
        Validate parameters.

        Returns:
            List of error messages (empty if valid)
        """
        errors = []
        for name in ("chi12", "chi1S", "chi2S"):
            if getattr(self, name) < 0:
                errors.append(f"{name} must be nonnegative, got {getattr(self, name)}")
        if not 0 < self.lam < 1:
            errors.append(f"lambda must lie in (0, 1), got {self.lam}")
        if self.eps <= 0:
            errors.append(f"eps must be positive, got {self.eps}")
        if self.big_a <= 0:
            errors.append(f"bigA must be positive, got {self.big_a}")
        return errors


@dataclass(frozen=True)
class ReactionCoeffs:
    """Formation (c1, c3) and dissociation (c2, c4) rates of the two complexes."""

    c1: float = 1.0
    c2: float = 0.01
    c3: float = 1.0
    c4: float = 0.01
    T_final: float = 1.0
    area: float = 1.0

    def formation(self, i: int) -> float:
        """Rate c_{2i-1} for complex i in {1, 2}."""
        return self.c1 if i == 1 else self.c3

    def dissociation(self, i: int) -> float:
        """Rate c_{2i} for complex i in {1, 2}."""
        return self.c2 if i == 1 else self.c4


@dataclass
class ValidationReport:
    """Outcome of a validator: empty message list means valid."""

    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.messages

    def __bool__(self) -> bool:
        return self.ok


@dataclass
class SimState:
    """Snapshot of the coupled system at one time level.

    ``phi``, ``mu`` and ``R`` have shape (2, nx, ny); ``P`` has shape (nx, ny).
    """

    t: float
    phi: np.ndarray
    mu: np.ndarray
    P: np.ndarray
    R: np.ndarray
    grid: Grid
    step_index: int = 0

    @property
    def phi1(self) -> Field:
        return Field(self.phi[0], self.grid)

    @property
    def phi2(self) -> Field:
        return Field(self.phi[1], self.grid)

    @property
    def mu1(self) -> Field:
        return Field(self.mu[0], self.grid)

    @property
    def mu2(self) -> Field:
        return Field(self.mu[1], self.grid)

    @property
    def P_field(self) -> Field:
        return Field(self.P, self.grid)

    @property
    def R1(self) -> Field:
        return Field(self.R[0], self.grid)

    @property
    def R2(self) -> Field:
        return Field(self.R[1], self.grid)

    def conserved_totals(self) -> tuple[float, float, float, float, float]:
        """Means of 2(phi1+phi2)+R1+R2+P, phi_i+R_i, phi1+phi2+P and R1+R2-P."""
        g = self.grid
        phi_sum = self.phi[0] + self.phi[1]
        r_sum = self.R[0] + self.R[1]
        return (
            float(g.mean(2.0 * phi_sum + r_sum + self.P)),
            float(g.mean(self.phi[0] + self.R[0])),
            float(g.mean(self.phi[1] + self.R[1])),
            float(g.mean(phi_sum + self.P)),
            float(g.mean(r_sum - self.P)),
        )

    def is_finite(self) -> bool:
        return all(
            bool(np.all(np.isfinite(a))) for a in (self.phi, self.mu, self.P, self.R)
        )


CSV_COLUMNS = (
    "t",
    "mass_total",
    "mass_phiR1",
    "mass_phiR2",
    "mass_phiP",
    "mass_RminusP",
    "Pmin",
    "Pmax",
    "R1min",
    "R1max",
    "R2min",
    "R2max",
    "phi1mean",
    "phi2mean",
    "sep",
    "energy",
    "grad_mu_l2",
    "mu1_mean",
    "mu2_mean",
    "yosida_gap",
    "w_half_gradmu",
    "w_alpha_mu",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Invariant quantities of one output time; field order is the CSV column order."""

    t: float
    mass_total: float
    mass_phiR1: float
    mass_phiR2: float
    mass_phiP: float
    mass_RminusP: float
    Pmin: float
    Pmax: float
    R1min: float
    R1max: float
    R2min: float
    R2max: float
    phi1mean: float
    phi2mean: float
    sep: float
    energy: float
    grad_mu_l2: float
    mu1_mean: float
    mu2_mean: float
    yosida_gap: float
    w_half_gradmu: float
    w_alpha_mu: float

    def as_row(self) -> tuple[float, ...]:
        return astuple(self)

    @classmethod
    def from_row(cls, row: tuple[float, ...] | list[float]) -> "DiagnosticsRecord":
        if len(row) != len(CSV_COLUMNS):
            raise ValueError(f"expected {len(CSV_COLUMNS)} values, got {len(row)}")
        return cls(*(float(v) for v in row))

    def mass_columns(self) -> tuple[float, ...]:
        return (
            self.mass_total,
            self.mass_phiR1,
            self.mass_phiR2,
            self.mass_phiP,
            self.mass_RminusP,
        )

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_row())


@dataclass(frozen=True)
class MeanSample:
    """Spatial means at one time level, taken before the step leaving it."""

    t: float
    y1: float  # mean of phi1
    y2: float
    f1: float  # mean of h(P) h(R1)
    f2: float
    jmean1: float  # mean of the resolvent's first component
    jmean2: float
    pmean: float
    rmean1: float
    rmean2: float


@dataclass
class ChoState:
    """Scalar Cahn-Hilliard-Oono state; ``phi`` and ``mu`` have shape (nx, ny)."""

    t: float
    phi: np.ndarray
    mu: np.ndarray
    grid: Grid
    step_index: int = 0


CHO_CSV_COLUMNS = (
    "t",
    "phi_mean",
    "discrete_mean",
    "analytic_mean",
    "phi_min",
    "phi_max",
    "j_min",
    "j_max",
    "energy",
    "grad_mu_l2",
    "mu_mean",
)


@dataclass(frozen=True)
class ChoRecord:
    """Per-output quantities of a Cahn-Hilliard-Oono run."""

    t: float
    phi_mean: float
    discrete_mean: float  # closed form of the explicit-source recursion
    analytic_mean: float  # continuum relaxation c + (y0 - c) exp(-m t)
    phi_min: float
    phi_max: float
    j_min: float  # resolvent range
    j_max: float
    energy: float
    grad_mu_l2: float
    mu_mean: float

    def as_row(self) -> tuple[float, ...]:
        return astuple(self)


@dataclass
class InvariantCheck:
    """Pass/fail of one invariant family; ``asserted`` is False for report-only checks."""

    name: str
    passed: bool
    detail: str = ""
    asserted: bool = True
    worst: Optional[float] = None
