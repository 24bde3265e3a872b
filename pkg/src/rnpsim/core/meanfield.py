"""Spatial-mean dynamics: the mean-value balance, its bounds and the Oono closed form."""

import math
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from rnpsim.core.models import MeanSample, ReactionCoeffs
from rnpsim.core.reactions import c_star

# Upper-bound, cap and conservation slack
BOUND_TOL = 1e-9
# Sandwich slack
SANDWICH_TOL = 1e-6
# Largest lambda for which the bounds are asserted rather than reported
ASSERT_LAMBDA_MAX = 1e-2


@dataclass
class MeanSeries:
    """Time series of spatial means, one entry per time level."""

    times: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    jmean1: np.ndarray
    jmean2: np.ndarray
    pmean: np.ndarray
    rmean1: np.ndarray
    rmean2: np.ndarray

    def __post_init__(self) -> None:
        for f in fields(self):
            setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=float))
        lengths = {getattr(self, f.name).shape for f in fields(self)}
        if len(lengths) != 1 or self.times.ndim != 1:
            raise ValueError("mean series arrays must be one-dimensional and equally long")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("mean series times must be strictly increasing")

    @classmethod
    def from_samples(cls, samples: Sequence[MeanSample]) -> "MeanSeries":
        columns = {f.name: [getattr(s, f.name) for s in samples] for f in fields(MeanSample)}
        columns["times"] = columns.pop("t")
        return cls(**columns)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def y(self, i: int) -> np.ndarray:
        return self.y1 if i == 1 else self.y2

    def f(self, i: int) -> np.ndarray:
        return self.f1 if i == 1 else self.f2

    def jmean(self, i: int) -> np.ndarray:
        return self.jmean1 if i == 1 else self.jmean2

    def rmean(self, i: int) -> np.ndarray:
        return self.rmean1 if i == 1 else self.rmean2

    def conservation_drift(self) -> float:
        """Largest drift of y_i + rmean_i and of 2(y1 + y2) + rmean1 + rmean2 + pmean."""
        totals = [
            self.y1 + self.rmean1,
            self.y2 + self.rmean2,
            2.0 * (self.y1 + self.y2) + self.rmean1 + self.rmean2 + self.pmean,
        ]
        return max(float(np.max(np.abs(v - v[0]))) for v in totals)


@dataclass
class OdeResidual:
    """Residual of (y_i(n+1) - y_i(n)) / dt + c_{2i} jmean_i(n) - c_{2i-1} f_i(n)."""

    values: np.ndarray  # shape (2, len(series) - 1)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def mean_ode_residual(series: MeanSeries, c: ReactionCoeffs) -> OdeResidual:
    """
    Per-interval residual of the discrete mean-value balance.

    Raises:
        ValueError: If the series has fewer than two entries
    """
    if len(series) < 2:
        raise ValueError("mean-value residual needs at least two time levels")
    dt = np.diff(series.times)
    rows = []
    for i in (1, 2):
        y = series.y(i)
        rows.append(
            np.diff(y) / dt
            + c.dissociation(i) * series.jmean(i)[:-1]
            - c.formation(i) * series.f(i)[:-1]
        )
    return OdeResidual(np.array(rows))


@dataclass
class MeanBoundsReport:
    """Outcome of the mean-value bounds on one trajectory."""

    upper_ok: bool
    positivity_ok: bool
    sandwich_ok: bool
    cap_ok: bool
    asserted: bool  # False when lambda is too large for the bounds to be claimed
    upper_margin: float  # min over t > 0, i of c_{2i-1} t - y_i
    sandwich_margin: float  # min over t > 0, i of y_i - kappa_i (1 - e^{-c_{2i} t})
    cap_margin: float
    cap: float
    kappa: list[float] = field(default_factory=list)  # final kappa_i
    correction: float = 0.0  # max |y_i - jmean_i|, the lambda^(1/2)-order term
    correction_constant: float = 0.0  # correction / lambda^(1/2)

    @property
    def all_pass(self) -> bool:
        return self.upper_ok and self.positivity_ok and self.sandwich_ok and self.cap_ok


def mean_bounds_check(
    series: MeanSeries,
    c: ReactionCoeffs,
    lam: float,
    alpha0: Optional[float] = None,
    cstar: Optional[float] = None,
) -> MeanBoundsReport:
    """
    Check upper bound, positivity, lower sandwich and total cap of the complex means.

    The lower bound uses kappa_i(t) = (c_{2i-1}/c_{2i}) min_{s<=t} q_i(s) - max_{s<=t}
    |y_i(s) - jmean_i(s)|, with q_i = min(pmean rmean_i, f_i) so the bound stays a
    valid minorant of the formation rate.

    Args:
        series: Mean series starting at t = 0
        c: Reaction coefficients (T_final and area feed c*)
        lam: Yosida parameter of the run
        alpha0: Initial protein mean (defaults to the series' first pmean)
        cstar: Separation threshold (defaults to c_star(c))

    Returns:
        MeanBoundsReport
    """
    t = series.times
    alpha0 = float(series.pmean[0]) if alpha0 is None else alpha0
    cstar = c_star(c) if cstar is None else cstar
    cap = min(alpha0 - cstar, 1.0 - alpha0 - 2.0 * cstar)

    upper_margin = math.inf
    sandwich_margin = math.inf
    positivity_ok = True
    kappa_final = []
    correction = 0.0
    for i in (1, 2):
        y = series.y(i)
        formation, dissociation = c.formation(i), c.dissociation(i)
        # both bounds hold with equality at t = 0, so the margins are taken over t > 0
        later = t > 0
        if np.any(later):
            upper_margin = min(upper_margin, float(np.min((formation * t - y)[later])))
            positivity_ok = positivity_ok and bool(np.all(y[later] > 0))

        rate = np.minimum(series.pmean * series.rmean(i), series.f(i))
        gap = np.maximum.accumulate(np.abs(y - series.jmean(i)))
        kappa = (formation / dissociation) * np.minimum.accumulate(rate) - gap
        lower = -kappa * np.expm1(-dissociation * t)
        if np.any(later):
            sandwich_margin = min(sandwich_margin, float(np.min((y - lower)[later])))
        kappa_final.append(float(kappa[-1]))
        correction = max(correction, float(gap[-1]))

    total = series.y1 + series.y2
    cap_margin = float(np.min(cap - total))
    return MeanBoundsReport(
        upper_ok=upper_margin >= -BOUND_TOL,
        positivity_ok=positivity_ok,
        sandwich_ok=sandwich_margin >= -SANDWICH_TOL,
        cap_ok=cap_margin >= -BOUND_TOL,
        asserted=lam <= ASSERT_LAMBDA_MAX,
        upper_margin=upper_margin,
        sandwich_margin=sandwich_margin,
        cap_margin=cap_margin,
        cap=cap,
        kappa=kappa_final,
        correction=correction,
        correction_constant=correction / math.sqrt(lam),
    )


def analytic_cho_mean(y0: float, m: float, c_oono: float, t: float) -> float:
    """Mean of the Oono model: c + (y0 - c) e^{-m t}."""
    if m < 0:
        raise ValueError(f"relaxation rate must be nonnegative, got {m}")
    return c_oono + (y0 - c_oono) * math.exp(-m * t)


def discrete_cho_mean(y0: float, m: float, c_oono: float, tau: float, n: int) -> float:
    """Mean after n explicit-source steps: c + (y0 - c)(1 - m tau)^n."""
    if m < 0:
        raise ValueError(f"relaxation rate must be nonnegative, got {m}")
    return c_oono + (y0 - c_oono) * (1.0 - m * tau) ** n
