"""Signal-to-noise functionals and data-driven ridge selection.

Under the rank-one prior alternatives, the power of the test is governed by
the ratio xi(lambda)/Theta2(lambda). xi is estimated either from an explicit
alignment matrix D,

    xi(lambda) = (1/p) tr[(W2 + lambda I)^{-1} D],

or, for D given as a quadratic polynomial of the population covariance, from
the resolvent moment recursion

    U_0 = (n2/p) (phi(-lambda) - (1 - p/n2)/lambda),
    U_{i+1} = (M_i - lambda U_i) / (lambda phi(-lambda)),

which only needs the spectral moments M_0 = 1 and M_1 = tr(W2)/p. The ridge
parameter is then chosen by maximizing the estimated ratio over a log-spaced
grid between tr(W2)/(50 p) and 5 tr(W2)/p.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .edge import EdgeParams
from .exceptions import (
    AllPointsFailedError,
    DegenerateTransformError,
    DimensionMismatchError,
    InputError,
    RidgeRootError,
    UnsupportedOrderError,
)
from .fmatrix import SscpPair
from .spectrum_fit import DiscreteMeasure
from .stieltjes import SpectrumView, stieltjes
from .validation import check_positive_lambda, check_symmetric


@dataclass(frozen=True)
class AlternativePrior:
    """Rank-one alternative alignment: explicit D or polynomial coefficients."""

    kind: str  # "explicit_D" | "polynomial"
    D: np.ndarray | None = None
    pis: tuple | None = None

    def __post_init__(self):
        if self.kind == "explicit_D":
            if self.D is None or self.pis is not None:
                raise InputError("explicit_D prior requires D and no pis")
            D = np.asarray(self.D, dtype=np.float64)
            object.__setattr__(self, "D", D)
            check_symmetric("D", D)
        elif self.kind == "polynomial":
            if self.pis is None or self.D is not None:
                raise InputError("polynomial prior requires pis and no D")
            pis = tuple(float(c) for c in self.pis)
            if len(pis) != 3:
                raise InputError("polynomial prior takes exactly (pi0, pi1, pi2)")
            object.__setattr__(self, "pis", pis)
        else:
            raise InputError(f"unknown prior kind {self.kind!r}")

    @classmethod
    def identity(cls, p: int) -> "AlternativePrior":
        return cls(kind="explicit_D", D=np.eye(p))

    @classmethod
    def explicit(cls, D) -> "AlternativePrior":
        return cls(kind="explicit_D", D=np.asarray(D, dtype=np.float64))

    @classmethod
    def polynomial(cls, pi0: float, pi1: float, pi2: float) -> "AlternativePrior":
        return cls(kind="polynomial", pis=(pi0, pi1, pi2))

    def check_positive_on(self, measure: DiscreteMeasure) -> None:
        """Proxy positivity check of the polynomial on the fitted atoms."""
        if self.kind != "polynomial":
            return
        pi0, pi1, pi2 = self.pis
        vals = pi0 + pi1 * measure.masses + pi2 * measure.masses**2
        if np.any(vals <= 0):
            raise InputError(
                "polynomial prior is not positive on the fitted spectrum atoms"
            )


@dataclass(frozen=True)
class LambdaSelection:
    """Per-lambda ratio curve and the selected maximizer."""

    grid: np.ndarray
    xi: np.ndarray
    theta2: np.ndarray
    ratio: np.ndarray
    lambda_opt: float
    ok: np.ndarray = field(repr=False)  # per-point success flags

    def __post_init__(self):
        if not np.any(self.ok):
            raise InputError("selection must contain at least one valid point")


def xi_explicit(sscp: SscpPair, lam: float, D: np.ndarray) -> float:
    """(1/p) tr[(W2 + lambda I)^{-1} D] via a Cholesky solve against D."""
    lam = check_positive_lambda(lam)
    D = np.asarray(D, dtype=np.float64)
    p = sscp.p
    if D.shape != (p, p):
        raise DimensionMismatchError(f"D has shape {D.shape}, expected {(p, p)}")
    c, low = scipy.linalg.cho_factor(
        sscp.W2 + lam * np.eye(p), lower=True, check_finite=False
    )
    solved = scipy.linalg.cho_solve((c, low), D, check_finite=False)
    return float(np.trace(solved) / p)


def spectral_moments(sscp: SscpPair, r: int) -> list[float]:
    """Population spectral moment estimates needed for degree-r polynomials.

    Only r <= 2 is supported: the recursion consumes M_0 = 1 and
    M_1 = tr(W2)/p, and higher orders would require higher-moment plug-ins.
    """
    if r not in (0, 1, 2):
        raise UnsupportedOrderError(f"r must be 0, 1 or 2, got {r}")
    if r == 0:
        return [1.0]
    return [1.0, float(np.trace(sscp.W2) / sscp.p)]


def resolvent_moments(view: SpectrumView, sscp: SscpPair, lam: float, n_terms: int = 3):
    """The recursion values U_0..U_{n_terms-1} at -lambda.

    U_i estimates (1/p) tr[(lambda phi(-lambda) Sigma + lambda I)^{-1} Sigma^i];
    U_0 is an exact identity for (1/p) tr[(W2 + lambda I)^{-1}] through the
    companion-spectrum relation.
    """
    lam = check_positive_lambda(lam)
    phi = stieltjes(view, complex(-lam), 0).real
    if abs(phi) < 1e-14:
        raise DegenerateTransformError(f"phi(-lambda)={phi} too close to zero")
    p, n2 = view.p, view.n2
    moments = spectral_moments(sscp, 2)
    ups = [n2 / p * (phi - (1.0 - p / n2) / lam)]
    for i in range(n_terms - 1):
        m_i = moments[i] if i < len(moments) else None
        if m_i is None:
            raise UnsupportedOrderError(f"no spectral moment estimate of order {i}")
        ups.append((m_i - lam * ups[i]) / (lam * phi))
    return ups


def xi_polynomial(view: SpectrumView, sscp: SscpPair, lam: float, pis) -> float:
    """xi estimate for D = pi0 I + pi1 Sigma + pi2 Sigma^2."""
    pi0, pi1, pi2 = (float(c) for c in pis)
    u0, u1, u2 = resolvent_moments(view, sscp, lam, n_terms=3)
    return pi0 * u0 + pi1 * u1 + pi2 * u2


def select_lambda(
    view: SpectrumView,
    sscp: SscpPair,
    prior: AlternativePrior,
    edge_solver,
    grid_size: int = 25,
    *,
    lambda_bounds: tuple[float, float] | None = None,
) -> LambdaSelection:
    """Maximize the estimated signal-to-noise ratio over a lambda grid.

    ``edge_solver`` is a callable (view, lam) -> EdgeParams running the full
    Theta2 pipeline. Grid points whose pipeline fails are dropped with a
    warning; ties break toward the smaller lambda.
    """
    if grid_size < 1:
        raise InputError("grid_size must be positive")
    mean_eig = float(np.trace(sscp.W2) / sscp.p)
    if lambda_bounds is None:
        lambda_bounds = (mean_eig / 50.0, 5.0 * mean_eig)
    lo, hi = lambda_bounds
    if not (0 < lo <= hi):
        raise InputError(f"invalid lambda bounds {lambda_bounds}")
    grid = np.geomspace(lo, hi, grid_size)

    xi_vals = np.full(grid_size, np.nan)
    theta2_vals = np.full(grid_size, np.nan)
    ok = np.zeros(grid_size, dtype=bool)
    for i, lam in enumerate(grid):
        try:
            params: EdgeParams = edge_solver(view, float(lam))
            if prior.kind == "explicit_D":
                xi = xi_explicit(sscp, float(lam), prior.D)
            else:
                xi = xi_polynomial(view, sscp, float(lam), prior.pis)
            xi_vals[i] = xi
            theta2_vals[i] = params.theta2
            ok[i] = True
        except RidgeRootError as exc:
            warnings.warn(
                f"lambda={lam:.6g} dropped from the selection grid: {exc}",
                RuntimeWarning,
                stacklevel=2,
            )
    if not np.any(ok):
        raise AllPointsFailedError("every lambda grid point failed")
    ratio = xi_vals / theta2_vals
    best = None
    for i in range(grid_size):
        if ok[i] and (best is None or ratio[i] > ratio[best]):
            best = i
    return LambdaSelection(
        grid=grid,
        xi=xi_vals,
        theta2=theta2_vals,
        ratio=ratio,
        lambda_opt=float(grid[best]),
        ok=ok,
    )
