"""Cell-centered rectangular grid, grid fields and the Neumann Laplacian.

Cells are indexed ``[i, j]`` with ``i`` along x and ``j`` along y. Walls carry
zero flux (mirrored ghost cells), so every discrete divergence telescopes and
the sum of a Laplacian over the grid vanishes up to roundoff.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp

from rnpsim.core.errors import NumericalError, StructuralError

MIN_CELLS = 4


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on [0, lx] x [0, ly]."""

    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self) -> None:
        if self.nx < MIN_CELLS or self.ny < MIN_CELLS:
            raise StructuralError(
                f"grid needs at least {MIN_CELLS} cells per axis, got {self.nx}x{self.ny}"
            )
        if not (self.lx > 0 and self.ly > 0):
            raise StructuralError(f"domain sides must be positive, got {self.lx}x{self.ly}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def h_min(self) -> float:
        return min(self.hx, self.hy)

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates as two (nx, ny) arrays."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def check_shape(self, values: np.ndarray) -> None:
        """Raise StructuralError unless the trailing axes match the grid."""
        if values.ndim < 2 or values.shape[-2:] != self.shape:
            raise StructuralError(
                f"array of shape {values.shape} does not match grid {self.shape}"
            )

    def apply_laplacian(self, values: np.ndarray) -> np.ndarray:
        """Five-point Neumann Laplacian over the last two axes, in flux form."""
        self.check_shape(values)
        out = np.zeros_like(values, dtype=float)
        fx = np.diff(values, axis=-2) / self.hx**2
        out[..., :-1, :] += fx
        out[..., 1:, :] -= fx
        fy = np.diff(values, axis=-1) / self.hy**2
        out[..., :, :-1] += fy
        out[..., :, 1:] -= fy
        return out

    def mean(self, values: np.ndarray) -> np.ndarray | float:
        """Average over the last two axes."""
        self.check_shape(values)
        return values.mean(axis=(-2, -1))

    def integrate(self, values: np.ndarray) -> np.ndarray | float:
        self.check_shape(values)
        return values.sum(axis=(-2, -1)) * self.cell_area

    def l2_norm(self, values: np.ndarray) -> float:
        """Discrete L2 norm; leading axes are treated as vector components."""
        self.check_shape(values)
        return float(np.sqrt(np.sum(values**2) * self.cell_area))

    def dirichlet_energy(self, values: np.ndarray) -> float:
        """Sum over interior faces of squared difference quotients times cell area.

        Equals ``-<laplacian(f), f>`` exactly; leading axes are summed.
        """
        self.check_shape(values)
        gx = np.diff(values, axis=-2) / self.hx
        gy = np.diff(values, axis=-1) / self.hy
        return float((np.sum(gx**2) + np.sum(gy**2)) * self.cell_area)

    def laplacian_matrix(self) -> sp.csr_matrix:
        """Sparse matrix acting on C-order flattened fields like ``apply_laplacian``."""
        return _neumann_laplacian(self.nx, self.ny, self.hx, self.hy)

    def laplacian_eigenvalues(self) -> np.ndarray:
        """
        Eigenvalues of the Neumann Laplacian, shape (nx, ny).

        The eigenvectors are the type-II cosine modes, so ``idctn(eig * dctn(f))``
        with orthonormal transforms reproduces ``apply_laplacian(f)``.
        """
        kx = np.sin(0.5 * np.pi * np.arange(self.nx) / self.nx) ** 2 * (4.0 / self.hx**2)
        ky = np.sin(0.5 * np.pi * np.arange(self.ny) / self.ny) ** 2 * (4.0 / self.hy**2)
        return -(kx[:, None] + ky[None, :])


@lru_cache(maxsize=16)
def _neumann_laplacian(nx: int, ny: int, hx: float, hy: float) -> sp.csr_matrix:
    dx = _neumann_second_difference(nx) / hx**2
    dy = _neumann_second_difference(ny) / hy**2
    return (sp.kron(dx, sp.identity(ny)) + sp.kron(sp.identity(nx), dy)).tocsr()


def _neumann_second_difference(n: int) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    main[0] = main[-1] = -1.0
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


@dataclass(frozen=True)
class Field:
    """A scalar grid function."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise StructuralError(
                f"field of shape {values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise NumericalError("field contains non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(np.full(grid.shape, float(value)), grid)

    @classmethod
    def from_function(
        cls, grid: Grid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ) -> "Field":
        """Sample ``fn(x, y)`` at cell centers."""
        x, y = grid.centers()
        return cls(np.broadcast_to(fn(x, y), grid.shape).astype(float), grid)


def laplacian(f: Field) -> Field:
    """Neumann Laplacian of a field."""
    return Field(f.grid.apply_laplacian(f.values), f.grid)


def mean(f: Field) -> float:
    return float(f.grid.mean(f.values))


def integrate(f: Field) -> float:
    return float(f.grid.integrate(f.values))


def l2_norm(f: Field) -> float:
    return f.grid.l2_norm(f.values)


def dirichlet_energy(f: Field) -> float:
    """Discrete ``∫|∇f|²`` from face differences; zero exactly for constants."""
    return f.grid.dirichlet_energy(f.values)