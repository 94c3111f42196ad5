"""End-to-end wiring: data -> SSCP -> spectrum fit -> edge params -> test."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .edge import (
    DEFAULT_MARGIN_FRAC,
    DEFAULT_STEPS,
    EdgeParams,
    SFunTable,
    estimate_edge_params,
)
from .fmatrix import LargestRootResult, LinearModel, SscpPair, build_sscp, largest_root
from .power import AlternativePrior, LambdaSelection, select_lambda
from .spectrum_fit import LpFitReport, fit_measure
from .stieltjes import SpectrumView, build_zgrid, stieltjes
from .tracy_widom import TestReport, standardized_test


@dataclass(frozen=True)
class FitConfig:
    """Grid sizes and solver knobs for the estimation chain."""

    K: int = 500
    I: int = 500
    d: int = 2
    ode_steps: int = DEFAULT_STEPS
    margin_frac: float = DEFAULT_MARGIN_FRAC
    second_order: bool = False
    lambda_grid: int = 25

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "I": self.I,
            "d": self.d,
            "ode_steps": self.ode_steps,
            "margin_frac": self.margin_frac,
            "second_order": self.second_order,
            "lambda_grid": self.lambda_grid,
        }


@dataclass(frozen=True)
class EdgeFit:
    """Everything produced while estimating the edge parameters at one lambda."""

    params: EdgeParams
    table: SFunTable = field(repr=False)
    lp_report: LpFitReport = field(repr=False)


def estimate_edge_from_spectrum(
    view: SpectrumView, lam: float, config: FitConfig = FitConfig()
) -> EdgeFit:
    """LP measure fit followed by the rho / ODE / beta chain."""
    zgrid = build_zgrid(view, lam, config.I)
    lp = fit_measure(
        view, lam, zgrid, K=config.K, d=config.d, second_order=config.second_order
    )
    # Recommended Newton start for s(0), from the transform at -lambda.
    g2 = view.gamma2_hat
    phi = stieltjes(view, complex(-lam), 0).real
    s0_hint = 1.0 / (lam * g2 * phi) - 1.0 / g2 if phi > 0 else None
    params, table = estimate_edge_params(
        lp.measure,
        lam,
        view.gamma1_hat,
        view.gamma2_hat,
        margin_frac=config.margin_frac,
        steps=config.ode_steps,
        s0_hint=s0_hint,
    )
    return EdgeFit(params=params, table=table, lp_report=lp)


def make_edge_solver(config: FitConfig = FitConfig()):
    """Callable (view, lam) -> EdgeParams for data-driven lambda selection."""

    def solver(view: SpectrumView, lam: float) -> EdgeParams:
        return estimate_edge_from_spectrum(view, lam, config).params

    return solver


@dataclass(frozen=True)
class TestOutcome:
    """Report plus all intermediate artifacts of one test run."""

    report: TestReport
    root: "LargestRootResult"
    sscp: SscpPair
    view: SpectrumView
    edge_fit: EdgeFit
    selection: LambdaSelection | None = None


def run_test(
    Y,
    X,
    C=None,
    *,
    lam: float | None = None,
    prior: AlternativePrior | None = None,
    alphas=(0.05,),
    k_roots: int = 1,
    config: FitConfig = FitConfig(),
) -> TestOutcome:
    """Full test from raw matrices.

    When ``lam`` is None the ridge parameter is chosen by maximizing the
    estimated signal-to-noise ratio under ``prior`` (identity by default).
    ``C`` defaults to the identity, i.e. the joint hypothesis B = 0.
    """
    X = np.asarray(X, dtype=np.float64)
    if C is None:
        C = np.eye(X.shape[0])
    model = LinearModel(Y=np.asarray(Y, dtype=np.float64), X=X, C=np.asarray(C, dtype=np.float64))
    sscp = build_sscp(model)
    view = SpectrumView.from_sscp(sscp)

    selection = None
    if lam is None:
        if prior is None:
            prior = AlternativePrior.identity(sscp.p)
        selection = select_lambda(
            view, sscp, prior, make_edge_solver(config), grid_size=config.lambda_grid
        )
        lam = selection.lambda_opt

    edge_fit = estimate_edge_from_spectrum(view, float(lam), config)
    if prior is not None:
        # proxy positivity check of polynomial priors on the fitted spectrum
        prior.check_positive_on(edge_fit.lp_report.measure)
    result = largest_root(sscp, float(lam), k=k_roots)
    report = standardized_test(result, edge_fit.params, sscp.p, alphas=alphas)
    return TestOutcome(
        report=report,
        root=result,
        sscp=sscp,
        view=view,
        edge_fit=edge_fit,
        selection=selection,
    )
