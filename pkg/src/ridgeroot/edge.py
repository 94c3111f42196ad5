"""Spectral edge, Stieltjes extension s(x) via an ODE, and the TW parameters.

Given a discrete population measure (fitted or exact), this module walks the
estimation chain

    rho     leftmost support edge of the regularized companion ensemble,
    s(x)    real extension of the resolvent transform on [0, rho),
    beta    unique solution of beta^2 s'(beta) = 1/gamma1,
    Theta1  = (1/beta) [1 + gamma1 beta s(beta)],
    Theta2  = [ (gamma1^3/2) s''(beta) + gamma1^2/beta^3 ]^{1/3},

which are the centering and scaling constants of the Tracy-Widom limit of the
regularized largest root. s is propagated by fixed-step RK4 from a
Newton-computed initial value; s' and s'' follow pointwise from the algebraic
relations

    s'(x)  = H2(g)/(1 - H2(g) zeta),
    s''(x) = [2 (zeta s' + 1)^2 H3(g) - 2 (1+g2 s)^{-3} H2(g) (g2 s')^2]
             / (1 - zeta H2(g)),
    g(x)   = x - 1/(1 + g2 s),  zeta(x) = g2/(1 + g2 s)^2,

with H_j the moment functionals of the measure. s' diverges at rho, so the
integration stops a relative margin short of the edge; the margin is halved
(and the step count doubled) when the beta crossing is not yet bracketed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .exceptions import (
    BetaOutOfRangeError,
    InitFailureError,
    InputError,
    NonConvergenceError,
    NoRootError,
    SingularDenominatorError,
)
from .spectrum_fit import DiscreteMeasure
from .validation import check_positive_lambda

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 200
SINGULAR_TOL = 1e-12
DEFAULT_MARGIN_FRAC = 1e-2
DEFAULT_STEPS = 2000
MAX_MARGIN_HALVINGS = 6


@dataclass(frozen=True)
class EdgeParams:
    """Edge quantities and the Tracy-Widom centering/scaling pair at one lambda."""

    lam: float
    rho: float
    beta: float
    s_at_beta: float
    s1_at_beta: float
    s2_at_beta: float
    theta1: float
    theta2: float
    is_discrete_edge: bool

    def __post_init__(self):
        if not (0.0 < self.beta < self.rho):
            raise InputError(f"beta={self.beta} must lie in (0, rho={self.rho})")
        if self.s1_at_beta <= 0 or self.s2_at_beta <= 0:
            raise InputError("s' and s'' must be positive at beta")
        if self.theta2 <= 0:
            raise InputError("theta2 must be positive")


@dataclass(frozen=True)
class SFunTable:
    """Sampled values of s, s', s'' on an increasing grid inside [0, rho)."""

    xs: np.ndarray
    s: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    lam: float
    gamma2: float
    rho: float
    margin: float


def _h_sums(measure: DiscreteMeasure, lam: float, h: float, orders=(1, 2, 3)):
    """H_j(h) for the requested orders in a single pass over the atoms."""
    denom = lam - measure.masses * h
    if np.any(denom <= 0.0):
        raise SingularDenominatorError(
            f"h={h} reached the functional domain boundary lambda/sigma_max"
        )
    frac = measure.masses / denom
    out = []
    acc = measure.weights.copy()
    for j in range(1, max(orders) + 1):
        acc = acc * frac
        if j in orders:
            out.append(float(acc.sum()))
    return out


def _newton_bracketed(f, fprime, lo, hi, flo, fhi, *, tol=NEWTON_TOL,
                      max_iter=NEWTON_MAX_ITER, what="equation"):
    """Safeguarded Newton on a bracketed monotone root: bisect when the
    Newton step leaves the bracket."""
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise NoRootError(f"{what}: no sign change on [{lo}, {hi}]")
    x = 0.5 * (lo + hi)
    fx = f(x)
    for _ in range(max_iter):
        if abs(fx) <= tol:
            return x
        if fx * flo < 0:
            hi = x
        else:
            lo, flo = x, fx
        d = fprime(x)
        x_new = x - fx / d if d != 0 else np.nan
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        x = x_new
        fx = f(x)
        if hi - lo <= abs(x) * 1e-16:
            return x
    if abs(fx) <= 1e-9:
        return x
    raise NonConvergenceError(f"{what}: residual {fx:.3e} after {max_iter} iterations")


def estimate_rho(measure: DiscreteMeasure, lam: float, gamma2: float):
    """Leftmost support edge of the regularized ensemble.

    Case 1 (discrete edge, gamma2 * w_max >= 1): rho = lambda / sigma_max.
    Case 2: solve gamma2 H2(h) / (1 + gamma2 H1(h))^2 = 1 for the unique root
    h* in (-inf, lambda/sigma_max) (the left side increases monotonically),
    then rho = h* + [1 + gamma2 H1(h*)]^{-1}.

    Returns ``(rho, is_discrete_edge)``.
    """
    lam = check_positive_lambda(lam)
    if gamma2 <= 0:
        raise InputError("gamma2 must be positive")
    w_max = float(measure.weights[0])
    h_sup = lam / measure.sigma_max
    if gamma2 * w_max >= 1.0:
        return h_sup, True

    def f(h):
        h1, h2 = _h_sums(measure, lam, h, orders=(1, 2))
        return gamma2 * h2 / (1.0 + gamma2 * h1) ** 2 - 1.0

    def fprime(h):
        h1, h2, h3 = _h_sums(measure, lam, h, orders=(1, 2, 3))
        one = 1.0 + gamma2 * h1
        return 2.0 * gamma2 * (h3 * one - gamma2 * h2**2) / one**3

    # Grid search for a bracket: f -> 1/(gamma2 w_max) - 1 > 0 at the sup and
    # f -> -1 far left.
    span = abs(h_sup) + lam / measure.masses[-1]
    hi = None
    eps = 1e-3 * span
    for _ in range(60):
        cand = h_sup - eps
        if f(cand) > 0:
            hi = cand
            break
        eps *= 0.5
    if hi is None:
        raise NoRootError("edge equation: could not find positive side near the pole")
    lo = None
    step = span
    for _ in range(60):
        cand = h_sup - step
        if f(cand) < 0:
            lo = cand
            break
        step *= 2.0
    if lo is None:
        raise NoRootError("edge equation: could not find negative side on the left")
    h_star = _newton_bracketed(f, fprime, lo, hi, f(lo), f(hi), what="edge equation")
    h1 = _h_sums(measure, lam, h_star, orders=(1,))[0]
    rho = h_star + 1.0 / (1.0 + gamma2 * h1)
    return float(rho), False


def solve_s_init(measure: DiscreteMeasure, lam: float, gamma2: float,
                 s0_hint: float | None = None) -> float:
    """Initial value s(0): the root of H1(-1/(1 + g2 s)) = s satisfying the
    side condition g2 H2(-1/(1 + g2 s)) < (1 + g2 s)^2.

    The side condition makes the fixed-point map locally contractive, so a
    short fixed-point warm-up followed by Newton lands on the correct branch.
    """
    lam = check_positive_lambda(lam)

    def arg(s):
        return -1.0 / (1.0 + gamma2 * s)

    def psi(s):
        return _h_sums(measure, lam, arg(s), orders=(1,))[0] - s

    s = float(s0_hint) if s0_hint is not None and s0_hint > 0 else None
    if s is None:
        s = _h_sums(measure, lam, -1.0, orders=(1,))[0]
    for _ in range(200):
        s_next = _h_sums(measure, lam, arg(s), orders=(1,))[0]
        if abs(s_next - s) < 1e-6 * max(abs(s), 1.0):
            s = s_next
            break
        s = s_next
    # Newton polish.
    for _ in range(NEWTON_MAX_ITER):
        h1, h2 = _h_sums(measure, lam, arg(s), orders=(1, 2))
        resid = h1 - s
        if abs(resid) <= NEWTON_TOL:
            break
        deriv = h2 * gamma2 / (1.0 + gamma2 * s) ** 2 - 1.0
        if deriv == 0.0:
            raise InitFailureError("degenerate Newton derivative for s(0)")
        s = s - resid / deriv
        if s <= 0:
            raise InitFailureError("s(0) iteration left the positive half-line")
    else:
        raise InitFailureError("Newton for s(0) did not converge")
    h2 = _h_sums(measure, lam, arg(s), orders=(2,))[0]
    if gamma2 * h2 >= (1.0 + gamma2 * s) ** 2:
        raise InitFailureError("s(0) root violates the contraction side condition")
    return float(s)


def solve_s_ode(
    measure: DiscreteMeasure,
    lam: float,
    gamma2: float,
    rho: float,
    margin: float,
    steps: int = DEFAULT_STEPS,
    s0_hint: float | None = None,
) -> SFunTable:
    """Propagate s on [0, rho - margin] by fixed-step RK4.

    s'' is evaluated from its algebraic formula at the saved nodes rather than
    integrated as a state, matching the estimation algorithm as written.
    """
    lam = check_positive_lambda(lam)
    if not (0.0 < margin < rho):
        raise InputError("margin must lie in (0, rho)")
    if steps < 8:
        raise InputError("need at least 8 RK4 steps")
    s0 = solve_s_init(measure, lam, gamma2, s0_hint=s0_hint)

    def deriv(x, s):
        g = x - 1.0 / (1.0 + gamma2 * s)
        h2 = _h_sums(measure, lam, g, orders=(2,))[0]
        zeta = gamma2 / (1.0 + gamma2 * s) ** 2
        den = 1.0 - h2 * zeta
        if den <= SINGULAR_TOL:
            raise SingularDenominatorError(
                f"1 - H2 zeta = {den:.3e} at x={x:.6g}; margin too small"
            )
        return h2 / den

    x_end = rho - margin
    h_step = x_end / steps
    xs = np.linspace(0.0, x_end, steps + 1)
    s_values = np.empty(steps + 1)
    s_values[0] = s0
    s = s0
    for i in range(steps):
        x = xs[i]
        k1 = deriv(x, s)
        k2 = deriv(x + 0.5 * h_step, s + 0.5 * h_step * k1)
        k3 = deriv(x + 0.5 * h_step, s + 0.5 * h_step * k2)
        k4 = deriv(x + h_step, s + h_step * k3)
        s = s + (h_step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s_values[i + 1] = s

    s1_values = np.empty(steps + 1)
    s2_values = np.empty(steps + 1)
    for i, (x, sv) in enumerate(zip(xs, s_values)):
        g = x - 1.0 / (1.0 + gamma2 * sv)
        h2, h3 = _h_sums(measure, lam, g, orders=(2, 3))
        one = 1.0 + gamma2 * sv
        zeta = gamma2 / one**2
        den = 1.0 - h2 * zeta
        if den <= SINGULAR_TOL:
            raise SingularDenominatorError(
                f"1 - H2 zeta = {den:.3e} at x={x:.6g}; margin too small"
            )
        s1 = h2 / den
        s1_values[i] = s1
        s2_values[i] = (
            2.0 * (zeta * s1 + 1.0) ** 2 * h3
            - 2.0 * h2 * (gamma2 * s1) ** 2 / one**3
        ) / den
    return SFunTable(
        xs=xs, s=s_values, s1=s1_values, s2=s2_values,
        lam=lam, gamma2=gamma2, rho=rho, margin=margin,
    )


def solve_beta_theta(
    table: SFunTable,
    gamma1: float,
    rho: float,
    lam: float,
    *,
    is_discrete_edge: bool = False,
) -> EdgeParams:
    """Solve beta^2 s'(beta) = 1/gamma1 on the table and form Theta1, Theta2.

    x -> x^2 s'(x) is strictly increasing (both factors are), so the root is
    bracketed by table nodes and polished by safeguarded Newton on monotone
    interpolants of s' and s''.
    """
    if gamma1 <= 0:
        raise InputError("gamma1 must be positive")
    target = 1.0 / gamma1
    crossing = table.xs**2 * table.s1
    if crossing[-1] < target:
        raise BetaOutOfRangeError(target, (float(crossing[0]), float(crossing[-1])))

    s_interp = PchipInterpolator(table.xs, table.s)
    s1_interp = PchipInterpolator(table.xs, table.s1)
    s2_interp = PchipInterpolator(table.xs, table.s2)

    def f(x):
        return x * x * float(s1_interp(x)) - target

    def fprime(x):
        return 2.0 * x * float(s1_interp(x)) + x * x * float(s2_interp(x))

    idx = int(np.searchsorted(crossing, target))
    idx = min(max(idx, 1), table.xs.size - 1)
    lo, hi = float(table.xs[idx - 1]), float(table.xs[idx])
    beta = _newton_bracketed(f, fprime, lo, hi, f(lo), f(hi), what="beta equation")

    s_b = float(s_interp(beta))
    s1_b = float(s1_interp(beta))
    s2_b = float(s2_interp(beta))
    theta1 = (1.0 + gamma1 * beta * s_b) / beta
    theta2 = (0.5 * gamma1**3 * s2_b + gamma1**2 / beta**3) ** (1.0 / 3.0)
    return EdgeParams(
        lam=lam, rho=rho, beta=float(beta),
        s_at_beta=s_b, s1_at_beta=s1_b, s2_at_beta=s2_b,
        theta1=float(theta1), theta2=float(theta2),
        is_discrete_edge=is_discrete_edge,
    )


def estimate_edge_params(
    measure: DiscreteMeasure,
    lam: float,
    gamma1: float,
    gamma2: float,
    *,
    margin_frac: float = DEFAULT_MARGIN_FRAC,
    steps: int = DEFAULT_STEPS,
    s0_hint: float | None = None,
) -> tuple[EdgeParams, SFunTable]:
    """Full chain rho -> s table -> (beta, Theta1, Theta2) for one lambda.

    When the beta crossing is not reached, the margin is halved and the step
    count doubled (keeping the step-to-margin ratio, hence the finite
    difference quality near the right end) up to six times.
    """
    rho, discrete = estimate_rho(measure, lam, gamma2)
    frac, n_steps = margin_frac, steps
    last_exc: BetaOutOfRangeError | None = None
    for _ in range(MAX_MARGIN_HALVINGS + 1):
        table = solve_s_ode(
            measure, lam, gamma2, rho, margin=frac * rho, steps=n_steps,
            s0_hint=s0_hint,
        )
        try:
            params = solve_beta_theta(
                table, gamma1, rho, lam, is_discrete_edge=discrete
            )
            return params, table
        except BetaOutOfRangeError as exc:
            last_exc = exc
            frac *= 0.5
            n_steps *= 2
    raise last_exc


def oracle_edge_params(
    sigma_eigs,
    lam: float,
    gamma1: float,
    gamma2: float,
    *,
    margin_frac: float = DEFAULT_MARGIN_FRAC,
    steps: int = DEFAULT_STEPS,
) -> EdgeParams:
    """Ground-truth parameters from the exact population spectrum.

    Runs the identical pipeline with the uniform measure on ``sigma_eigs``
    (duplicates collapsed) in place of the LP fit; used as the simulation
    reference for (Theta1, Theta2).
    """
    measure = DiscreteMeasure.from_eigenvalues(sigma_eigs)
    params, _ = estimate_edge_params(
        measure, lam, gamma1, gamma2, margin_frac=margin_frac, steps=steps
    )
    return params
