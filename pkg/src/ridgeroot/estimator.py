"""scikit-learn style front door for the ridge-regularized largest root test."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .exceptions import InputError
from .pipeline import FitConfig, run_test
from .power import AlternativePrior


def _resolve_prior(prior, p: int) -> AlternativePrior:
    if isinstance(prior, AlternativePrior):
        return prior
    if prior is None or prior == "identity":
        return AlternativePrior.identity(p)
    if isinstance(prior, (tuple, list)) and len(prior) == 3:
        return AlternativePrior.polynomial(*prior)
    arr = np.asarray(prior, dtype=np.float64)
    if arr.ndim == 2:
        return AlternativePrior.explicit(arr)
    raise InputError(f"cannot interpret prior {prior!r}")


class RidgeLargestRootTest(BaseEstimator):
    """Largest-root test of H0: B C = 0 in the model Y = B X + noise.

    Parameters
    ----------
    lam : float or None
        Ridge parameter. ``None`` selects it by maximizing the estimated
        signal-to-noise ratio under ``prior``.
    prior : "identity", (pi0, pi1, pi2), matrix, or AlternativePrior
        Alternative alignment used only for data-driven lambda selection.
    alphas : sequence of float
        Test levels for the reject decisions.
    K, I : int
        Mass-grid and z-grid sizes of the spectrum fit.
    ode_steps : int
        Fixed RK4 step count for the s(x) propagation.
    lambda_grid : int
        Number of log-spaced candidate lambdas when ``lam`` is None.
    k_roots : int
        How many leading eigenvalues of the regularized F-matrix to return.

    Attributes (after ``fit``)
    --------------------------
    lambda_, ell_max_, top_k_, theta1_, theta2_, statistic_, p_value_,
    reject_at_, measure_, edge_params_, selection_, report_.
    """

    def __init__(
        self,
        lam: float | None = None,
        prior="identity",
        alphas=(0.05,),
        K: int = 500,
        I: int = 500,
        ode_steps: int = 2000,
        lambda_grid: int = 25,
        second_order: bool = False,
        k_roots: int = 1,
    ):
        self.lam = lam
        self.prior = prior
        self.alphas = alphas
        self.K = K
        self.I = I
        self.ode_steps = ode_steps
        self.lambda_grid = lambda_grid
        self.second_order = second_order
        self.k_roots = k_roots

    def _config(self) -> FitConfig:
        return FitConfig(
            K=self.K,
            I=self.I,
            ode_steps=self.ode_steps,
            second_order=self.second_order,
            lambda_grid=self.lambda_grid,
        )

    def fit(self, Y, X, C=None):
        """Run the test on responses Y (p x n_T), design X (m x n_T) and
        constraints C (m x n1, identity when omitted)."""
        Y = np.asarray(Y, dtype=np.float64)
        X = np.asarray(X, dtype=np.float64)
        prior = _resolve_prior(self.prior, Y.shape[0]) if self.lam is None else None
        outcome = run_test(
            Y,
            X,
            C,
            lam=self.lam,
            prior=prior,
            alphas=self.alphas,
            k_roots=self.k_roots,
            config=self._config(),
        )
        report = outcome.report
        self.lambda_ = report.lam
        self.ell_max_ = report.ell_max
        self.top_k_ = outcome.root.top_k.copy()
        self.theta1_ = report.theta1
        self.theta2_ = report.theta2
        self.statistic_ = report.statistic
        self.p_value_ = report.p_value
        self.reject_at_ = dict(report.reject_at)
        self.measure_ = outcome.edge_fit.lp_report.measure
        self.edge_params_ = outcome.edge_fit.params
        self.selection_ = outcome.selection
        self.report_ = report
        self.outcome_ = outcome
        self.n_features_in_ = Y.shape[0]
        return self

    def _check_fitted(self):
        if not hasattr(self, "report_"):
            raise NotFittedError("this RidgeLargestRootTest instance is not fitted yet")

    def predict(self, alpha: float = 0.05) -> bool:
        """Reject decision at the given level for the fitted data."""
        self._check_fitted()
        if alpha in self.reject_at_:
            return bool(self.reject_at_[alpha])
        from .tracy_widom import tw1_quantile

        return bool(self.statistic_ > tw1_quantile(1.0 - alpha))

    def score(self) -> float:
        """The standardized statistic (larger = stronger evidence)."""
        self._check_fitted()
        return float(self.statistic_)
