"""Tracy-Widom (type 1) reference distribution and the standardized test.

The CDF ships as a static table (x from -10 to 6, step 0.01) generated
offline by scripts/make_tw1_table.py from the Fredholm determinant of the
rank-reduced Airy kernel; see that script for the method and self-checks.
Lookups use monotone cubic interpolation with asymptotic tail continuation
beyond the grid: the left tail decays like exp(-|x|^3/24) and the right tail
like exp(-(2/3) x^{3/2}).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .edge import EdgeParams
from .exceptions import InputError, MismatchedLambdaError
from .fmatrix import LargestRootResult


@dataclass(frozen=True)
class Tw1Table:
    """Strictly increasing CDF samples of the type-1 Tracy-Widom law."""

    xs: np.ndarray
    cdf: np.ndarray

    def __post_init__(self):
        if self.xs.ndim != 1 or self.xs.shape != self.cdf.shape:
            raise InputError("xs and cdf must be equal-length 1-D arrays")
        if np.any(np.diff(self.xs) <= 0) or np.any(np.diff(self.cdf) <= 0):
            raise InputError("table must be strictly increasing in x and cdf")
        if not (0 < self.cdf[0] < 0.005 and 0.9995 < self.cdf[-1] < 1):
            raise InputError("table must span essentially all of the distribution")


def load_tw1_table(path=None) -> Tw1Table:
    """Read a two-column (x, cdf) CSV; defaults to the packaged table."""
    if path is None:
        ref = resources.files("ridgeroot") / "data" / "tw1_cdf.csv"
        with ref.open("r") as fh:
            rows = list(csv.reader(fh))
    else:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    if rows and not rows[0][0].lstrip("-").replace(".", "").isdigit():
        rows = rows[1:]  # header
    data = np.array([[float(a), float(b)] for a, b in rows])
    return Tw1Table(xs=data[:, 0], cdf=data[:, 1])


@lru_cache(maxsize=1)
def _table_and_interp():
    table = load_tw1_table()
    return table, PchipInterpolator(table.xs, table.cdf)


def tw1_cdf(x: float) -> float:
    """P(TW1 <= x), interpolated on the shipped table with clamped tails."""
    x = float(x)
    table, interp = _table_and_interp()
    lo, hi = table.xs[0], table.xs[-1]
    if x < lo:
        return float(table.cdf[0] * np.exp((abs(lo) ** 3 - abs(x) ** 3) / 24.0))
    if x > hi:
        tail = (1.0 - table.cdf[-1]) * np.exp(-(2.0 / 3.0) * (x**1.5 - hi**1.5))
        return float(1.0 - tail)
    return float(interp(x))


def tw1_quantile(q: float) -> float:
    """Inverse CDF of TW1 for q in (0, 1)."""
    q = float(q)
    if not 0.0 < q < 1.0:
        raise InputError(f"quantile level must be in (0, 1), got {q}")
    table, interp = _table_and_interp()
    lo, hi = float(table.xs[0]), float(table.xs[-1])
    if q <= table.cdf[0]:
        # invert the left-tail continuation
        return -float((abs(lo) ** 3 - 24.0 * np.log(q / table.cdf[0])) ** (1.0 / 3.0))
    if q >= table.cdf[-1]:
        ratio = (1.0 - q) / (1.0 - table.cdf[-1])
        return float((hi**1.5 - 1.5 * np.log(ratio)) ** (2.0 / 3.0))
    return float(brentq(lambda x: float(interp(x)) - q, lo, hi, xtol=1e-12))


@dataclass(frozen=True)
class TestReport:
    """Outcome of the standardized largest-root test at one lambda."""

    lam: float
    ell_max: float
    theta1: float
    theta2: float
    statistic: float
    p_value: float
    reject_at: dict = field(default_factory=dict)
    theta_source: str = "empirical"

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "ell_max": self.ell_max,
            "theta1": self.theta1,
            "theta2": self.theta2,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reject_at": {str(a): bool(r) for a, r in self.reject_at.items()},
            "theta_source": self.theta_source,
        }


def standardized_test(
    result: LargestRootResult,
    params: EdgeParams,
    p: int,
    alphas=(0.05,),
    theta_source: str = "empirical",
) -> TestReport:
    """Standardize ell_max and compare against upper TW1 quantiles.

    statistic = p^{2/3} (ell_max - Theta1) / Theta2;
    p_value = 1 - TW1(statistic); reject at level a when the statistic
    exceeds the (1-a) quantile.
    """
    if params.lam != result.lam:
        raise MismatchedLambdaError(
            f"largest root at lambda={result.lam} but parameters at {params.lam}"
        )
    if theta_source not in ("empirical", "oracle"):
        raise InputError(f"unknown theta_source {theta_source!r}")
    statistic = float(p ** (2.0 / 3.0) * (result.ell_max - params.theta1) / params.theta2)
    p_value = 1.0 - tw1_cdf(statistic)
    reject = {float(a): statistic > tw1_quantile(1.0 - float(a)) for a in alphas}
    return TestReport(
        lam=result.lam,
        ell_max=result.ell_max,
        theta1=params.theta1,
        theta2=params.theta2,
        statistic=statistic,
        p_value=float(p_value),
        reject_at=reject,
        theta_source=theta_source,
    )
