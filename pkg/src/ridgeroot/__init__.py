"""Ridge-regularized largest root test for high-dimensional linear hypotheses."""

from .edge import (
    EdgeParams,
    SFunTable,
    estimate_edge_params,
    estimate_rho,
    oracle_edge_params,
    solve_beta_theta,
    solve_s_ode,
)
from .estimator import RidgeLargestRootTest
from .fmatrix import LargestRootResult, LinearModel, SscpPair, build_sscp, largest_root
from .pipeline import EdgeFit, FitConfig, TestOutcome, estimate_edge_from_spectrum, run_test
from .power import (
    AlternativePrior,
    LambdaSelection,
    select_lambda,
    spectral_moments,
    xi_explicit,
    xi_polynomial,
)
from .spectrum_fit import DiscreteMeasure, LpFitReport, fit_measure, h_funcs
from .stieltjes import SpectrumView, ZGrid, build_zgrid, q_hats, stieltjes
from .tracy_widom import TestReport, standardized_test, tw1_cdf, tw1_quantile

__version__ = "0.1.0"

__all__ = [
    "AlternativePrior",
    "DiscreteMeasure",
    "EdgeFit",
    "EdgeParams",
    "FitConfig",
    "LambdaSelection",
    "LargestRootResult",
    "LinearModel",
    "LpFitReport",
    "RidgeLargestRootTest",
    "SFunTable",
    "SscpPair",
    "SpectrumView",
    "TestOutcome",
    "TestReport",
    "ZGrid",
    "build_sscp",
    "build_zgrid",
    "estimate_edge_from_spectrum",
    "estimate_edge_params",
    "estimate_rho",
    "fit_measure",
    "h_funcs",
    "largest_root",
    "oracle_edge_params",
    "q_hats",
    "run_test",
    "select_lambda",
    "solve_beta_theta",
    "solve_s_ode",
    "spectral_moments",
    "standardized_test",
    "stieltjes",
    "tw1_cdf",
    "tw1_quantile",
    "xi_explicit",
    "xi_polynomial",
]
