"""Discrete population spectral measure fitted by linear programming.

The population spectral distribution is approximated by point masses on a
fixed sigma-grid; the weights minimize the worst-case normalized mismatch
between the moment functionals (Q1, Q2) read off the empirical Stieltjes
transform and the corresponding mixture functionals

    H~_j(h) = sum_k w_k sigma_k^j / (lambda - sigma_k h)^j,

evaluated at h_i = -lambda phi(z_i) over the z grid. Minimizing the
sup-norm of the real and imaginary residual parts is a linear program in
(w_1..w_K, theta); tiny optimal weights are truncated and the rest
renormalized to sum one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .exceptions import (
    DegenerateSpectrumError,
    DomainViolationError,
    EmptyMeasureError,
    InputError,
    LpInfeasibleError,
)
from .stieltjes import SpectrumView, ZGrid, q_hats, q_second_derivative, stieltjes
from .validation import check_positive_lambda

WEIGHT_SUM_TOL = 1e-12
# Curvature constraints degrade accuracy once p >> n2 (phi'' is too noisy).
SECOND_ORDER_GAMMA2_CUTOFF = 5.0


@dataclass(frozen=True)
class DiscreteMeasure:
    """Point masses sigma_1 > ... > sigma_B with positive weights summing to one."""

    masses: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "weights", weights)
        if masses.ndim != 1 or masses.shape != weights.shape or masses.size == 0:
            raise InputError("masses and weights must be equal-length 1-D arrays")
        if np.any(masses <= 0) or np.any(np.diff(masses) >= 0):
            raise InputError("masses must be positive and strictly decreasing")
        if np.any(weights <= 0):
            raise InputError("weights must be strictly positive")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise InputError(f"weights must sum to one, got {weights.sum()!r}")

    @property
    def sigma_max(self) -> float:
        return float(self.masses[0])

    @property
    def n_atoms(self) -> int:
        return self.masses.size

    @classmethod
    def from_eigenvalues(cls, eigs) -> "DiscreteMeasure":
        """Uniform measure on a spectrum, with duplicate eigenvalues collapsed."""
        eigs = np.asarray(eigs, dtype=np.float64)
        if eigs.ndim != 1 or eigs.size == 0:
            raise InputError("eigenvalue list must be a non-empty 1-D array")
        if np.any(eigs <= 0):
            raise InputError("population eigenvalues must be strictly positive")
        values, counts = np.unique(eigs, return_counts=True)
        order = np.argsort(values)[::-1]
        return cls(masses=values[order], weights=counts[order] / eigs.size)


@dataclass(frozen=True)
class LpFitReport:
    """Fitted measure plus the achieved sup-norm loss and grid bookkeeping."""

    measure: DiscreteMeasure
    loss_theta: float
    n_active: int
    grid_K: int
    grid_I: int
    raw_weights: np.ndarray = field(repr=False)
    sigma_grid: np.ndarray = field(repr=False)


def h_funcs(measure: DiscreteMeasure, lam: float, h: float, j: int) -> float:
    """Mixture functional H_j(h) = sum_k w_k sigma_k^j / (lambda - sigma_k h)^j."""
    lam = check_positive_lambda(lam)
    if j not in (1, 2, 3):
        raise InputError(f"j must be 1, 2 or 3, got {j}")
    h = float(h)
    if h >= lam / measure.sigma_max:
        raise DomainViolationError(
            f"h={h} outside the domain h < lambda/sigma_max = {lam / measure.sigma_max}"
        )
    denom = lam - measure.masses * h
    return float(np.sum(measure.weights * measure.masses**j / denom**j))


def default_sigma_grid(view: SpectrumView, K: int) -> np.ndarray:
    """K equally spaced mass locations on [l_{n2}, l_1], floored at l_1/K at zero."""
    if K < 1:
        raise InputError("K must be positive")
    hi = view.l_max
    lo = float(view.eigs[-1])
    if lo <= 0.0:
        lo = hi / K
    if K == 1:
        return np.array([hi])
    return np.linspace(lo, hi, K)


def fit_measure(
    view: SpectrumView,
    lam: float,
    zgrid: ZGrid,
    K: int = 500,
    d: int = 2,
    *,
    sigma_grid=None,
    second_order: bool = False,
) -> LpFitReport:
    """Algorithmic weight selection via the sup-norm linear program.

    ``sigma_grid`` overrides the default equally spaced grid (the grid is
    user-selectable). ``second_order`` adds the optional constraints matching
    the curvature of Q1 along the grid; they are ignored when
    gamma2_hat >= 5 where the required phi'' estimate is unreliable.
    """
    lam = check_positive_lambda(lam)
    if len(zgrid) == 0:
        raise InputError("z grid must be nonempty")
    if view.l_max <= 0:
        raise DegenerateSpectrumError("spectrum must have at least one positive eigenvalue")
    sigmas = (
        np.asarray(sigma_grid, dtype=np.float64)
        if sigma_grid is not None
        else default_sigma_grid(view, K)
    )
    if np.any(sigmas <= 0) or np.any(np.diff(sigmas) <= 0):
        raise InputError("sigma grid must be positive and strictly increasing")
    K_grid = sigmas.size
    I_grid = len(zgrid)

    if second_order and view.gamma2_hat >= SECOND_ORDER_GAMMA2_CUTOFF:
        warnings.warn(
            "second-order constraints disabled for gamma2_hat >= 5",
            RuntimeWarning,
            stacklevel=2,
        )
        second_order = False

    # Residual rows: e = rhs - coeffs @ w with |Re e| <= theta, |Im e| <= theta.
    coeff_rows = []
    rhs = []
    for z, phi in zip(zgrid.points, zgrid.targets):
        q1, q2 = q_hats(view, lam, z)
        base = sigmas * lam * phi + lam
        coeff_rows.append(sigmas / base / abs(q1))
        rhs.append(q1 / abs(q1))
        coeff_rows.append(sigmas**2 / base**2 / abs(q2))
        rhs.append(q2 / abs(q2))
        if second_order:
            phi1 = stieltjes(view, z, 1)
            phi2 = stieltjes(view, z, 2)
            q1dd = q_second_derivative(view, lam, z)
            # d^2/dz^2 H~_1(-lam phi(z)) = 2 lam^2 phi'^2 H~_3 - lam phi'' H~_2
            row = (
                2.0 * lam**2 * phi1**2 * sigmas**3 / base**3
                - lam * phi2 * sigmas**2 / base**2
            )
            coeff_rows.append(row / abs(q1dd))
            rhs.append(q1dd / abs(q1dd))
    A = np.asarray(coeff_rows)
    b = np.asarray(rhs)

    # minimize theta  s.t.  -theta <= Re/Im(b - A w) <= theta, w >= 0, sum w = 1
    n_rows = A.shape[0]
    A_ub = np.empty((4 * n_rows, K_grid + 1))
    b_ub = np.empty(4 * n_rows)
    A_ub[0::4, :K_grid] = -A.real
    b_ub[0::4] = -b.real
    A_ub[1::4, :K_grid] = A.real
    b_ub[1::4] = b.real
    A_ub[2::4, :K_grid] = -A.imag
    b_ub[2::4] = -b.imag
    A_ub[3::4, :K_grid] = A.imag
    b_ub[3::4] = b.imag
    A_ub[:, K_grid] = -1.0
    A_eq = np.zeros((1, K_grid + 1))
    A_eq[0, :K_grid] = 1.0
    cost = np.zeros(K_grid + 1)
    cost[K_grid] = 1.0
    res = linprog(
        cost,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=[1.0],
        bounds=[(0.0, None)] * (K_grid + 1),
        method="highs",
    )
    if res.status != 0 or res.x is None:
        raise LpInfeasibleError(
            f"LP solver returned status {res.status}: {res.message}"
        )
    w = np.maximum(res.x[:K_grid], 0.0)
    theta = float(res.x[K_grid])

    keep = w > 10.0 ** (-d) / K_grid
    if not np.any(keep):
        raise EmptyMeasureError("all weights fell below the truncation threshold")
    w_kept = w[keep] / w[keep].sum()
    sig_kept = sigmas[keep]
    order = np.argsort(sig_kept)[::-1]
    measure = DiscreteMeasure(masses=sig_kept[order], weights=w_kept[order])
    return LpFitReport(
        measure=measure,
        loss_theta=theta,
        n_active=int(keep.sum()),
        grid_K=K_grid,
        grid_I=I_grid,
        raw_weights=w,
        sigma_grid=sigmas,
    )
