"""Empirical Stieltjes transform of the companion W2 spectrum and its grids.

The companion spectrum holds the n2 eigenvalues of U2' Z' Sigma Z U2, which
shares its nonzero eigenvalues with W2: when p < n2 the list is W2's spectrum
padded with zeros, and when p > n2 only the n2 largest (the nonzero-capable
entries) are kept.

All transforms are plain eigenvalue sums:

    phi(z)   = (1/n2) sum_j (l_j - z)^{-1}
    phi'(z)  = (1/n2) sum_j (l_j - z)^{-2}
    phi''(z) = (2/n2) sum_j (l_j - z)^{-3}
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateSpectrumError,
    DegenerateTransformError,
    InputError,
    InversionFailureError,
    PoleHitError,
)
from .fmatrix import SscpPair
from .validation import check_positive_lambda

POLE_TOL = 1e-14
DEGENERATE_TOL = 1e-14
# Imaginary part assigned to the transform targets when building z grids,
# in units of 1/l_max.
GRID_IMAG_SCALE = 1e-2


@dataclass(frozen=True)
class SpectrumView:
    """Companion spectrum of W2 together with the aspect ratios."""

    eigs: np.ndarray  # length n2, nonincreasing, >= 0
    n2: int
    p: int
    n1: int

    def __post_init__(self):
        eigs = np.asarray(self.eigs, dtype=np.float64)
        object.__setattr__(self, "eigs", eigs)
        if eigs.shape != (self.n2,):
            raise InputError(
                f"companion spectrum must have n2={self.n2} entries, got {eigs.shape}"
            )
        if np.any(eigs < 0) or np.any(np.diff(eigs) > 0):
            raise InputError("companion eigenvalues must be nonnegative and nonincreasing")
        if min(self.n1, self.n2, self.p) < 1:
            raise InputError("p, n1, n2 must be positive")

    @property
    def gamma1_hat(self) -> float:
        return self.p / self.n1

    @property
    def gamma2_hat(self) -> float:
        return self.p / self.n2

    @property
    def l_max(self) -> float:
        return float(self.eigs[0])

    @classmethod
    def from_w2_eigs(cls, w2_eigs, p: int, n1: int, n2: int) -> "SpectrumView":
        """Build the companion view from the p eigenvalues of W2."""
        eigs = np.sort(np.asarray(w2_eigs, dtype=np.float64))[::-1]
        if eigs.shape != (p,):
            raise InputError(f"expected {p} eigenvalues of W2, got {eigs.shape}")
        if p < n2:
            eigs = np.concatenate([eigs, np.zeros(n2 - p)])
        elif p > n2:
            eigs = eigs[:n2]
        return cls(eigs=eigs.copy(), n2=n2, p=p, n1=n1)

    @classmethod
    def from_sscp(cls, sscp: SscpPair) -> "SpectrumView":
        return cls.from_w2_eigs(sscp.w2_eigs, p=sscp.p, n1=sscp.n1, n2=sscp.n2)


@dataclass(frozen=True)
class ZGrid:
    """Inverted evaluation grid: points z_i in C+ with their phi(z_i) values."""

    points: np.ndarray = field(repr=False)   # complex, Im > 0
    targets: np.ndarray = field(repr=False)  # phi(points)

    def __post_init__(self):
        if self.points.shape != self.targets.shape:
            raise InputError("points and targets must have equal length")
        if np.any(self.points.imag <= 0):
            raise InputError("all grid points must lie in the upper half-plane")

    def __len__(self) -> int:
        return self.points.size


def stieltjes(view: SpectrumView, z: complex, order: int = 0) -> complex:
    """Empirical Stieltjes transform of the companion spectrum, or a derivative.

    order 0 gives phi(z), order 1 gives phi'(z), order 2 gives phi''(z).
    """
    if order not in (0, 1, 2):
        raise InputError(f"order must be 0, 1 or 2, got {order}")
    z = complex(z)
    diff = view.eigs - z
    if np.min(np.abs(diff)) < POLE_TOL:
        raise PoleHitError(f"z={z} coincides with an eigenvalue of the spectrum")
    if order == 0:
        return complex(np.mean(1.0 / diff))
    if order == 1:
        return complex(np.mean(1.0 / diff**2))
    return complex(2.0 * np.mean(1.0 / diff**3))


def q_hats(view: SpectrumView, lam: float, z: complex) -> tuple[complex, complex]:
    """The pair (Q1, Q2) matching the first two moment functionals at z.

    Q1(z) = z/(lam g2) + 1/(lam g2 phi(z));
    Q2(z) = 1/(lam^2 g2 phi(z)^2) - 1/(lam^2 g2 phi'(z)).
    """
    lam = check_positive_lambda(lam)
    z = complex(z)
    if z.imag <= 0:
        raise InputError(f"q_hats requires Im(z) > 0, got z={z}")
    g2 = view.gamma2_hat
    phi = stieltjes(view, z, 0)
    phi1 = stieltjes(view, z, 1)
    if abs(phi) < DEGENERATE_TOL or abs(phi1) < DEGENERATE_TOL:
        raise DegenerateTransformError(
            f"phi(z)={phi}, phi'(z)={phi1} too close to zero at z={z}"
        )
    q1 = z / (lam * g2) + 1.0 / (lam * g2 * phi)
    q2 = 1.0 / (lam**2 * g2 * phi**2) - 1.0 / (lam**2 * g2 * phi1)
    return q1, q2


def q_second_derivative(view: SpectrumView, lam: float, z: complex) -> complex:
    """d^2 Q1 / dz^2, used by the optional curvature constraints in the LP fit."""
    lam = check_positive_lambda(lam)
    g2 = view.gamma2_hat
    phi = stieltjes(view, z, 0)
    phi1 = stieltjes(view, z, 1)
    phi2 = stieltjes(view, z, 2)
    if abs(phi) < DEGENERATE_TOL:
        raise DegenerateTransformError(f"phi(z)={phi} too close to zero at z={z}")
    return (2.0 * phi1**2 / phi**3 - phi2 / phi**2) / (lam * g2)


def _invert_phi(view: SpectrumView, target: complex, z0: complex,
                max_iter: int = 100, tol: float = 1e-12) -> complex | None:
    """Damped Newton solve of phi(z) = target starting from z0. None on failure.

    The iteration runs in the reciprocal coordinate u = -1/z: along the
    constant-Im(phi) target path the solution z can swing out to |z| of order
    1/Im(target) when Re(phi) changes sign, while u stays bounded (in the far
    field phi(-1/u) ~ u, so the map is near-identity there). Im(u) > 0 is
    equivalent to Im(z) > 0.
    """
    u = -1.0 / complex(z0)
    if u.imag <= 0:
        return None
    resid = stieltjes(view, -1.0 / u, 0) - target
    for _ in range(max_iter):
        if abs(resid) <= tol:
            return -1.0 / u
        # d phi / d u = phi'(z) * dz/du with z = -1/u, dz/du = 1/u^2.
        deriv = stieltjes(view, -1.0 / u, 1) / u**2
        if abs(deriv) < DEGENERATE_TOL:
            return None
        step = resid / deriv
        # Damp until the step stays in C+ and does not increase the residual.
        for _ in range(60):
            cand = u - step
            if cand.imag > 0:
                cand_resid = stieltjes(view, -1.0 / cand, 0) - target
                if abs(cand_resid) < abs(resid):
                    break
            step *= 0.5
        else:
            return None
        u, resid = cand, cand_resid
    return -1.0 / u if abs(resid) <= tol else None


def _bisect_real_part(view: SpectrumView, target: complex, imag: float,
                      lo: float, hi: float) -> complex | None:
    """Fallback: bisection on Re(z) with Im(z) held fixed, matching Re(phi)."""
    def f(x: float) -> float:
        return (stieltjes(view, complex(x, imag), 0) - target).real

    n_scan = 256
    xs = np.linspace(lo, hi, n_scan)
    vals = np.array([f(x) for x in xs])
    sign_change = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if sign_change.size == 0:
        return None
    a, b = xs[sign_change[0]], xs[sign_change[0] + 1]
    fa = f(a)
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if fa * fm <= 0:
            b = mid
        else:
            a, fa = mid, fm
        if abs(b - a) < 1e-15 * max(1.0, abs(a)):
            break
    return complex(0.5 * (a + b), imag)


def build_zgrid(view: SpectrumView, lam: float, count: int) -> ZGrid:
    """Evaluation grid z_1..z_I solving phi(z_i) = t_i by warm-started Newton.

    The targets t_i have real parts evenly spaced on
    [phi(1.05 l_max), phi(-lambda)] and common imaginary part 1e-2 / l_max;
    each is inverted through phi, falling back to bisection on the real part
    when Newton fails. The achieved pair (z_i, phi(z_i)) is stored.
    """
    lam = check_positive_lambda(lam)
    if count < 2:
        raise InputError("grid needs at least two points")
    l1 = view.l_max
    if l1 <= 0:
        raise DegenerateSpectrumError("largest companion eigenvalue must be positive")

    re_right = stieltjes(view, complex(1.05 * l1), 0).real
    re_left = stieltjes(view, complex(-lam), 0).real
    imag_target = GRID_IMAG_SCALE / l1
    targets = np.linspace(re_right, re_left, count) + 1j * imag_target

    # First warm start: just outside the spectrum, at the height that makes
    # Im(phi) approximately equal to the target (Im phi ~ eta * phi'(x)).
    x0 = 1.05 * l1
    slope = stieltjes(view, complex(x0), 1).real
    eta0 = imag_target / max(slope, DEGENERATE_TOL)
    z_prev = complex(x0, eta0)

    points = np.empty(count, dtype=np.complex128)
    achieved = np.empty(count, dtype=np.complex128)
    for i, t in enumerate(targets):
        z = _invert_phi(view, t, z_prev)
        if z is None:
            imag_fix = z_prev.imag if z_prev.imag > 0 else eta0
            z = _bisect_real_part(view, t, imag_fix, -lam - l1, 1.05 * l1 + lam)
        if z is None or z.imag <= 0:
            raise InversionFailureError(i, t, "Newton and bisection both failed")
        points[i] = z
        achieved[i] = stieltjes(view, z, 0)
        z_prev = z
    return ZGrid(points=points, targets=achieved)
