"""Falsification harness for the mean-zero gradient inequality of the mixing entropy.

For a field phi with values in the open simplex, m = min of the component means
and M = their sum (0 < m < M <= 1/8), the inequality reads

    c m integral |grad psi1(phi)| <= integral grad psi1(phi) . (phi - mean(phi))
                                     + C M (1 + |ln(m / 2)|)

with c = 1/4. Each trial reports the smallest C that makes it hold; the harness
searches random fields for a trial needing C above a ceiling.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from rnpsim.config.logging import get_logger
from rnpsim.core.grid import Grid
from rnpsim.core.potential import grad_psi1

Sampler = Callable[[np.random.Generator, Grid], np.ndarray]

REGION_NAMES = ("D1", "D2", "A1", "B1", "C1", "A2", "B2", "C2")
# Mean-sum ceiling under which the inequality is claimed
MAX_MEAN_SUM = 0.125
# Nominal smallest mean used to place region-sampled values
NOMINAL_MIN_MEAN = 1.0 / 32.0
_REJECTION_LIMIT = 100_000


@dataclass(frozen=True)
class MzParams:
    c_psi: float = 0.25
    ceiling: float = 1e3
    max_mean_sum: float = MAX_MEAN_SUM


@dataclass
class MzReport:
    trials: int
    evaluated: int = 0
    skipped_means: int = 0  # mean constraint 0 < m < M <= 1/8 violated
    skipped_domain: int = 0  # values outside the open simplex
    max_required: float = 0.0  # smallest C covering every evaluated trial
    worst_trial: Optional[int] = None
    violations: int = 0  # trials needing C above the ceiling
    ceiling: float = 1e3
    c_psi: float = 0.25
    worst_occupancy: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _classify(x: np.ndarray, y: np.ndarray, m: float) -> np.ndarray:
    """Region names of points (x, y); one row per partition of the simplex minus D."""
    d1 = (x <= 0.25) & (1.0 - 2.0 * x < y) & (y < 1.0 - x)
    d2 = (y <= 0.25) & (1.0 - 2.0 * y < x) & (x < 1.0 - y)
    labels = np.empty((2,) + x.shape, dtype="<U2")
    for row, (own, other) in enumerate(((x, y), (y, x))):
        i = row + 1
        region = np.where(own <= 0.5 * m, f"A{i}", f"C{i}")
        band = (own > 0.5 * m) & (own <= 0.5)
        region = np.where(band, f"B{i}", region)
        region = np.where(other > 1.0 - 2.0 * own, f"C{i}", region)
        region = np.where(d1, "D1", np.where(d2, "D2", region))
        labels[row] = region
    return labels


def mz_partition(phi: np.ndarray, m: float) -> np.ndarray:
    """
    Label every cell by the simplex region its value lies in.

    Outside D = D1 u D2 the simplex is split twice, into A1, B1, C1 (by the first
    component) and into A2, B2, C2 (by the second), so the result has one row per
    split.

    Args:
        phi: Field of shape (2, nx, ny) with values in the open simplex
        m: Smallest component mean

    Returns:
        String array of shape (2, nx, ny)
    """
    phi = np.asarray(phi, dtype=float)
    return _classify(phi[0], phi[1], m)


def region_occupancy(labels: np.ndarray) -> dict[str, float]:
    """Fraction of cells in each region (rows count separately for A, B, C)."""
    cells = labels[0].size
    counts = {name: 0 for name in REGION_NAMES}
    for name in ("D1", "D2"):
        counts[name] = int(np.count_nonzero(labels[0] == name))
    for row, i in ((0, 1), (1, 2)):
        for letter in "ABC":
            counts[f"{letter}{i}"] = int(np.count_nonzero(labels[row] == f"{letter}{i}"))
    return {name: counts[name] / cells for name in REGION_NAMES}


def required_constant(phi: np.ndarray, grid: Grid, c_psi: float = 0.25) -> float:
    """Smallest C for which the inequality holds on this field (0 if it holds with C = 0)."""
    means = grid.mean(phi)
    m, M = float(means.min()), float(means.sum())
    grad = grad_psi1(phi)
    lhs = c_psi * m * float(grid.integrate(np.sqrt(np.sum(grad**2, axis=0))))
    centered = float(grid.integrate(np.sum(grad * (phi - means[:, None, None]), axis=0)))
    return max(0.0, (lhs - centered) / (M * (1.0 + abs(math.log(0.5 * m)))))


def constant_field_requirement(m0: float, c_psi: float = 0.25) -> float:
    """Closed form of required_constant for phi = (m0, m0) on a unit-area domain."""
    gradient = abs(math.log(m0 / (1.0 - 2.0 * m0)))
    return c_psi * math.sqrt(2.0) * gradient / (2.0 * (1.0 + abs(math.log(0.5 * m0))))


def _in_open_simplex(phi: np.ndarray) -> bool:
    return bool(
        np.all(np.isfinite(phi)) and np.all(phi > 0.0) and np.all(1.0 - phi[0] - phi[1] > 0.0)
    )


def verify_mz(
    sampler: Sampler,
    n_trials: int,
    params: MzParams = MzParams(),
    grid: Optional[Grid] = None,
    seed: int = 0,
) -> MzReport:
    """
    Evaluate the inequality on n_trials sampled fields.

    Args:
        sampler: Callable (rng, grid) -> field of shape (2, nx, ny)
        n_trials: Number of fields to draw
        params: Constant c_psi, ceiling and mean-sum bound
        grid: Sampling grid (32 x 32 unit square by default)
        seed: Seed of the generator shared by all trials

    Returns:
        MzReport; trials violating the preconditions are counted, not evaluated
    """
    if n_trials < 0:
        raise ValueError(f"n_trials must be nonnegative, got {n_trials}")
    grid = grid or Grid(32, 32)
    rng = np.random.default_rng(seed)
    report = MzReport(trials=n_trials, ceiling=params.ceiling, c_psi=params.c_psi)
    worst_field = None
    worst_m = 0.0

    for trial in range(n_trials):
        phi = np.asarray(sampler(rng, grid), dtype=float)
        grid.check_shape(phi)
        if not _in_open_simplex(phi):
            report.skipped_domain += 1
            continue
        means = grid.mean(phi)
        m, M = float(means.min()), float(means.sum())
        if not (0.0 < m < M <= params.max_mean_sum):
            report.skipped_means += 1
            continue

        report.evaluated += 1
        required = required_constant(phi, grid, params.c_psi)
        if required > params.ceiling:
            report.violations += 1
        if report.worst_trial is None or required > report.max_required:
            report.max_required = required
            report.worst_trial = trial
            worst_field, worst_m = phi, m

    if worst_field is not None:
        report.worst_occupancy = region_occupancy(mz_partition(worst_field, worst_m))
    get_logger().info(
        "MZ harness: %d evaluated, %d skipped, max required C %.4g, %d violations",
        report.evaluated,
        report.skipped_means + report.skipped_domain,
        report.max_required,
        report.violations,
    )
    return report


def _block_field(grid: Grid, blocks: int, values: np.ndarray) -> np.ndarray:
    """Expand a (2, blocks, blocks) array of block values to the grid."""
    bx = np.minimum(np.arange(grid.nx) * blocks // grid.nx, blocks - 1)
    by = np.minimum(np.arange(grid.ny) * blocks // grid.ny, blocks - 1)
    return values[:, bx[:, None], by[None, :]]


def _background(rng: np.random.Generator, blocks: int, level: float) -> np.ndarray:
    return rng.uniform(0.1 * level, level, size=(2, blocks, blocks))


def piecewise_constant_sampler(
    rng: np.random.Generator,
    grid: Grid,
    blocks: int = 4,
    max_active: int = 2,
    background: float = 1e-2,
) -> np.ndarray:
    """Blocks near the pure solvent; one to max_active blocks drawn uniformly on the simplex."""
    values = _background(rng, blocks, background)
    n_active = int(rng.integers(1, max_active + 1))
    chosen = rng.choice(blocks * blocks, size=n_active, replace=False)
    for index in chosen:
        p = rng.dirichlet(np.ones(3))
        values[:, index // blocks, index % blocks] = p[:2]
    return _block_field(grid, blocks, values)


def sample_region(rng: np.random.Generator, name: str, m: float = NOMINAL_MIN_MEAN) -> np.ndarray:
    """Uniform point of the open simplex conditioned on lying in the named region."""
    row = 1 if name.endswith("2") and not name.startswith("D") else 0
    for _ in range(_REJECTION_LIMIT):
        p = rng.dirichlet(np.ones(3))[:2]
        label = _classify(p[:1], p[1:], m)[row, 0]
        if label == name:
            return p
    raise RuntimeError(f"could not sample region {name}")


def partition_sampler(
    rng: np.random.Generator,
    grid: Grid,
    blocks: int = 4,
    max_active: int = 2,
    background: float = 1e-2,
) -> np.ndarray:
    """Like piecewise_constant_sampler, but active blocks are drawn region by region."""
    values = _background(rng, blocks, background)
    n_active = int(rng.integers(1, max_active + 1))
    chosen = rng.choice(blocks * blocks, size=n_active, replace=False)
    for index in chosen:
        name = REGION_NAMES[int(rng.integers(len(REGION_NAMES)))]
        values[:, index // blocks, index % blocks] = sample_region(rng, name)
    return _block_field(grid, blocks, values)


def constant_sampler(m0: float) -> Sampler:
    """Sampler of the constant field (m0, m0)."""

    def sample(rng: np.random.Generator, grid: Grid) -> np.ndarray:
        return np.full((2,) + grid.shape, float(m0))

    return sample


SAMPLERS: dict[str, Sampler] = {
    "piecewise": piecewise_constant_sampler,
    "partition": partition_sampler,
}
