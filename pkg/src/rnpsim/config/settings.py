"""Run configurations for the coupled system and the Cahn-Hilliard-Oono model."""

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from rnpsim.core.grid import MIN_CELLS, Grid
from rnpsim.core.models import PotentialParams, PotentialVariant, ReactionCoeffs
from rnpsim.core.reactions import initial_profile, validate_coeffs, validate_initial

# Largest accepted Newton tolerance
MAX_NEWTON_TOL = 1e-6

# Relative slack when counting steps, so T_final = n * tau does not round up to n + 1
_STEP_SLACK = 1e-9


def default_time_step(nx: int, ny: int, lx: float, ly: float) -> float:
    """min(hx, hy)^2 / 8."""
    return min(lx / nx, ly / ny) ** 2 / 8.0


def config_key(f: dataclasses.Field) -> str:
    """Name of a dataclass field in config files."""
    return f.metadata.get("key", f.name)


def _validate_grid(nx: int, ny: int, lx: float, ly: float) -> list[str]:
    errors = []
    if nx < MIN_CELLS or ny < MIN_CELLS:
        errors.append(f"grid needs nx, ny >= {MIN_CELLS}, got {nx}x{ny}")
    if not (lx > 0 and ly > 0):
        errors.append(f"domain sides lx, ly must be positive, got {lx}x{ly}")
    return errors


def _validate_stepping(
    tau: float, T_final: float, newton_tol: float, newton_max_iter: int, output_every: int,
    snapshot_every: int,
) -> list[str]:
    errors = []
    if not tau > 0:
        errors.append(f"tau must be positive, got {tau}")
    if not T_final >= 0:
        errors.append(f"T_final must be nonnegative, got {T_final}")
    elif T_final > 0 and tau > 0 and T_final < tau:
        errors.append(f"T_final = {T_final} must be 0 or at least tau = {tau}")
    if not 0 < newton_tol <= MAX_NEWTON_TOL:
        errors.append(f"newton_tol must lie in (0, {MAX_NEWTON_TOL:g}], got {newton_tol}")
    if newton_max_iter < 1:
        errors.append(f"newton_max_iter must be at least 1, got {newton_max_iter}")
    if output_every < 1:
        errors.append(f"output_every must be at least 1, got {output_every}")
    if snapshot_every < 0:
        errors.append(f"snapshot_every must be nonnegative, got {snapshot_every}")
    return errors


def _step_count(T_final: float, tau: float) -> int:
    if T_final <= 0:
        return 0
    return max(1, math.ceil(T_final / tau - _STEP_SLACK))


class _ConfigMixin:
    """Shared manifest helpers for the run configurations."""

    def to_dict(self) -> dict[str, Any]:
        """Resolved configuration keyed by config-file names, in declaration order."""
        return {config_key(f): getattr(self, f.name) for f in dataclasses.fields(self)}

    @classmethod
    def field_map(cls) -> dict[str, dataclasses.Field]:
        """Config-file key -> dataclass field."""
        return {config_key(f): f for f in dataclasses.fields(cls)}

    @property
    def grid(self) -> Grid:
        return Grid(self.nx, self.ny, self.lx, self.ly)

    @property
    def n_steps(self) -> int:
        return _step_count(self.T_final, self.tau)


@dataclass
class SolverConfig(_ConfigMixin):
    """Coupled phase-field / reaction-diffusion run."""

    SECTION = "rnp"

    # Grid
    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0

    # Reaction rates (formation c1, c3; dissociation c2, c4)
    c1: float = 1.0
    c2: float = 0.01
    c3: float = 1.0
    c4: float = 0.01

    # Potential
    chi12: float = 1.0
    chi1S: float = 1.0
    chi2S: float = 1.0
    lam: float = field(default=1e-3, metadata={"key": "lambda"})
    variant: str = PotentialVariant.FLORY_HUGGINS.value
    eps: float = 1.0
    big_a: float = field(default=1.0, metadata={"key": "bigA"})

    # Time stepping (tau = None resolves to min(hx, hy)^2 / 8)
    tau: Optional[float] = None
    T_final: float = 0.05
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    output_every: int = 10
    snapshot_every: int = 0  # 0 disables PGM snapshots
    seed: int = 0

    # Initial free protein: P0_const + P0_amp cos(kx pi x) cos(ky pi y) + P0_noise U(-1, 1)
    P0_const: float = 0.5
    P0_amp: float = 0.0
    P0_kx: int = 1
    P0_ky: int = 1
    P0_noise: float = 0.0

    # Switches and probe parameters
    reactions: bool = True
    truncated: bool = True
    alpha: float = 0.5
    sigma: float = 0.01

    def __post_init__(self) -> None:
        if isinstance(self.variant, PotentialVariant):
            self.variant = self.variant.value
        if self.tau is None and self.nx > 0 and self.ny > 0:
            self.tau = default_time_step(self.nx, self.ny, self.lx, self.ly)

    @property
    def potential_variant(self) -> PotentialVariant:
        return PotentialVariant(self.variant)

    @property
    def coeffs(self) -> ReactionCoeffs:
        return ReactionCoeffs(
            c1=self.c1, c2=self.c2, c3=self.c3, c4=self.c4,
            T_final=self.T_final, area=self.lx * self.ly,
        )

    @property
    def potential(self) -> PotentialParams:
        return PotentialParams(
            chi12=self.chi12,
            chi1S=self.chi1S,
            chi2S=self.chi2S,
            lam=self.lam,
            variant=self.potential_variant,
            eps=self.eps,
            big_a=self.big_a,
        )

    def initial_protein(self) -> np.ndarray:
        return initial_profile(
            self.grid, self.P0_const, self.P0_amp, self.P0_kx, self.P0_ky, self.P0_noise,
            self.seed,
        )

    def validate(self) -> list[str]:
        """
        Validate the configuration, including rates and initial data.

        Returns:
            List of error messages (empty if valid)
        """
        errors = _validate_grid(self.nx, self.ny, self.lx, self.ly)
        if self.variant not in {v.value for v in PotentialVariant}:
            errors.append(
                f"variant must be one of flory_huggins, tilde; got {self.variant!r}"
            )
            return errors
        errors += _validate_stepping(
            self.tau, self.T_final, self.newton_tol, self.newton_max_iter,
            self.output_every, self.snapshot_every,
        )
        errors += self.potential.validate()
        if not 0 < self.alpha < 1:
            errors.append(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.sigma < 0:
            errors.append(f"sigma must be nonnegative, got {self.sigma}")

        coeff_report = validate_coeffs(self.coeffs)
        errors += coeff_report.messages
        if not errors:
            errors += validate_initial(self.initial_protein(), self.coeffs).messages
        return errors

    def replace(self, **changes: Any) -> "SolverConfig":
        """Copy with changes; a changed grid re-resolves the default time step."""
        if "tau" not in changes and {"nx", "ny", "lx", "ly"} & changes.keys():
            changes["tau"] = None
        return dataclasses.replace(self, **changes)


@dataclass
class ChoConfig(_ConfigMixin):
    """Scalar Cahn-Hilliard equation with the Oono relaxation source -m (phi - c)."""

    SECTION = "cho"

    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0

    m_rate: float = 1.0
    c_oono: float = 0.3
    lam: float = field(default=1e-3, metadata={"key": "lambda"})
    theta: float = 1.0  # F2(r) = -theta r^2

    tau: Optional[float] = 1e-3
    T_final: float = 1.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    output_every: int = 10
    snapshot_every: int = 0
    seed: int = 0

    phi0_const: float = -1.0
    phi0_amp: float = 0.0
    phi0_kx: int = 1
    phi0_ky: int = 1
    phi0_noise: float = 0.0

    # Forcing g in mu = -lap phi + F'(phi) + g
    g_const: float = 0.0
    g_file: Optional[str] = None  # .npy array of shape (nx, ny), added to g_const

    def __post_init__(self) -> None:
        if self.tau is None and self.nx > 0 and self.ny > 0:
            self.tau = default_time_step(self.nx, self.ny, self.lx, self.ly)

    def initial_phase(self) -> np.ndarray:
        return initial_profile(
            self.grid, self.phi0_const, self.phi0_amp, self.phi0_kx, self.phi0_ky,
            self.phi0_noise, self.seed,
        )

    def forcing(self) -> np.ndarray:
        """Time-independent forcing g on the grid."""
        g = np.full(self.grid.shape, float(self.g_const))
        if self.g_file:
            loaded = np.load(Path(self.g_file))
            if loaded.shape != self.grid.shape:
                raise ValueError(
                    f"forcing file {self.g_file} has shape {loaded.shape}, "
                    f"grid is {self.grid.shape}"
                )
            g = g + loaded
        return g

    def validate(self) -> list[str]:
        """
        Validate the configuration.

        Returns:
            List of error messages (empty if valid)
        """
        errors = _validate_grid(self.nx, self.ny, self.lx, self.ly)
        errors += _validate_stepping(
            self.tau, self.T_final, self.newton_tol, self.newton_max_iter,
            self.output_every, self.snapshot_every,
        )
        if self.m_rate < 0:
            errors.append(f"m_rate must be nonnegative, got {self.m_rate}")
        if not abs(self.c_oono) < 1:
            errors.append(f"c_oono must lie in (-1, 1), got {self.c_oono}")
        if not 0 < self.lam < 1:
            errors.append(f"lambda must lie in (0, 1), got {self.lam}")
        if self.theta < 0:
            errors.append(f"theta must be nonnegative, got {self.theta}")
        if errors:
            return errors

        phi0 = self.initial_phase()
        if np.any(np.abs(phi0) > 1.0):
            errors.append("phi0 must take values in [-1, 1]")
        elif not -1.0 <= float(phi0.mean()) < 1.0:
            errors.append(f"mean of phi0 must lie in [-1, 1), got {float(phi0.mean())}")

        if self.g_file:
            try:
                g = self.forcing()
            except (OSError, ValueError) as e:
                errors.append(f"cannot load forcing: {e}")
            else:
                if not np.all(np.isfinite(g)):
                    errors.append(f"forcing file {self.g_file} contains non-finite values")
        return errors

    def replace(self, **changes: Any) -> "ChoConfig":
        return dataclasses.replace(self, **changes)
