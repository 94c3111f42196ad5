"""Hypothesis and residual SSCP matrices and the regularized largest root.

Given the multivariate linear model Y = B X + noise with constraint matrix C,
this module builds the pair

    W1 = (1/n1) Y P1 Y',   P1 = X'(XX')^{-1} C [C'(XX')^{-1} C]^{-1} C'(XX')^{-1} X,
    W2 = (1/n2) Y (I - X'(XX')^{-1} X) Y',

and computes the top eigenvalues of W1 (W2 + lambda I)^{-1} through the
spectrally equivalent symmetric form (W2+lambda I)^{-1/2} W1 (W2+lambda I)^{-1/2},
which keeps the computation inside symmetric eigensolvers.

The projectors are never formed at n_T x n_T scale: thin QR factorizations of
X' and of the whitened constraint block give orthonormal bases U1, U2 with
P1 = U1 U1' and I - X'(XX')^{-1}X = I - Qx Qx'.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import (
    EigenFailureError,
    InputError,
    NotEstimableError,
    RankDeficientError,
)
from .validation import (
    as_matrix,
    check_positive_lambda,
    check_symmetric,
    matrix_rank,
    symmetrize,
)

# Relative clamping threshold for eigenvalues of PSD matrices.
EIG_CLAMP_REL = 1e-10
# Relative max-norm tolerance for symmetry checks.
SYM_REL_TOL = 1e-9


@dataclass(frozen=True)
class LinearModel:
    """Observed triple (Y, X, C) for the hypothesis B C = 0.

    Y is p x n_T (responses), X is m x n_T (design), C is m x n1
    (constraints). Requires n_T > m >= n1 >= 1, X of full row rank and C of
    full column rank, and C'(XX')^{-1}C positive definite (estimability).
    """

    Y: np.ndarray
    X: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        Y = as_matrix("Y", self.Y)
        X = as_matrix("X", self.X)
        C = as_matrix("C", self.C)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "C", C)
        p, n_T = Y.shape
        m, n_Tx = X.shape
        mc, n1 = C.shape
        if n_Tx != n_T:
            raise InputError(f"Y has {n_T} columns but X has {n_Tx}")
        if mc != m:
            raise InputError(f"X has {m} rows but C has {mc}")
        if not (n_T > m >= n1 >= 1):
            raise InputError(
                f"need n_T > m >= n1 >= 1, got n_T={n_T}, m={m}, n1={n1}"
            )
        if matrix_rank(X) < m:
            raise RankDeficientError("X does not have full row rank")
        if matrix_rank(C) < n1:
            raise RankDeficientError("C does not have full column rank")

    @property
    def p(self) -> int:
        return self.Y.shape[0]

    @property
    def n_T(self) -> int:
        return self.Y.shape[1]

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n1(self) -> int:
        return self.C.shape[1]

    @property
    def n2(self) -> int:
        return self.n_T - self.m


@dataclass(frozen=True)
class SscpPair:
    """Hypothesis/residual SSCP matrices with their degrees of freedom."""

    W1: np.ndarray
    W2: np.ndarray
    n1: int
    n2: int
    w2_eigs: np.ndarray = field(repr=False)

    def __post_init__(self):
        check_symmetric("W1", self.W1, SYM_REL_TOL)
        check_symmetric("W2", self.W2, SYM_REL_TOL)
        if self.W1.shape != self.W2.shape:
            raise InputError("W1 and W2 must have the same shape")

    @property
    def p(self) -> int:
        return self.W1.shape[0]


@dataclass(frozen=True)
class LargestRootResult:
    """Top-k spectrum of the ridge-regularized F-matrix at a given lambda."""

    lam: float
    ell_max: float
    top_k: np.ndarray

    def __post_init__(self):
        if self.top_k.size == 0:
            raise InputError("top_k must contain at least one eigenvalue")
        if np.any(np.diff(self.top_k) > 0):
            raise InputError("top_k must be nonincreasing")


def _clamp_psd_eigs(eigs: np.ndarray) -> np.ndarray:
    """Clamp eigenvalues below tol_eig = 1e-10 (largest + 1) to exactly zero."""
    tol = EIG_CLAMP_REL * (max(float(eigs.max(initial=0.0)), 0.0) + 1.0)
    if float(eigs.min(initial=0.0)) < -tol:
        raise EigenFailureError(
            f"matrix has eigenvalue {eigs.min():.3e} below -{tol:.3e}; not PSD"
        )
    return np.where(eigs < tol, 0.0, eigs)


def _sym_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        vals, vecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenFailureError(str(exc)) from exc
    return vals, vecs


def build_sscp(model: LinearModel) -> SscpPair:
    """Form (W1, W2) from the observed triple via thin factorizations.

    Raises :class:`NotEstimableError` when C'(XX')^{-1}C fails a
    positive-definite factorization.
    """
    Y, X, C = model.Y, model.X, model.C
    n1, n2 = model.n1, model.n2

    # X' = Qx Rx with Qx an n_T x m orthonormal basis of the row space of X.
    Qx, Rx = np.linalg.qr(X.T)
    # M = Rx^{-T} C satisfies M'M = C'(XX')^{-1}C.
    try:
        M = scipy.linalg.solve_triangular(Rx.T, C, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise RankDeficientError(f"triangular solve against X failed: {exc}") from exc
    try:
        scipy.linalg.cholesky(M.T @ M, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NotEstimableError(
            "C'(XX')^{-1}C is not positive definite"
        ) from exc
    Qm, _ = np.linalg.qr(M)
    U1 = Qx @ Qm  # n_T x n1, P1 = U1 U1'

    YU1 = Y @ U1
    W1 = symmetrize((YU1 @ YU1.T) / n1)
    YQx = Y @ Qx
    W2 = symmetrize((Y @ Y.T - YQx @ YQx.T) / n2)

    vals, _ = _sym_eigh(W2)
    w2_eigs = _clamp_psd_eigs(vals)[::-1].copy()  # nonincreasing
    return SscpPair(W1=W1, W2=W2, n1=n1, n2=n2, w2_eigs=w2_eigs)


def largest_root(sscp: SscpPair, lam: float, k: int = 1) -> LargestRootResult:
    """Top-k eigenvalues of W1 (W2 + lambda I)^{-1}.

    Computed as eigenvalues of the symmetric matrix
    S = (W2+lambda I)^{-1/2} W1 (W2+lambda I)^{-1/2}, which is similar to the
    F-matrix and therefore has the same spectrum, but is guaranteed real.
    """
    lam = check_positive_lambda(lam)
    p = sscp.p
    if not (1 <= k <= min(p, sscp.n1)):
        raise InputError(f"k must satisfy 1 <= k <= min(p, n1) = {min(p, sscp.n1)}")

    d, V = _sym_eigh(sscp.W2)
    d = np.maximum(d, 0.0)
    inv_sqrt = V * (1.0 / np.sqrt(d + lam))
    S = symmetrize(inv_sqrt @ (V.T @ sscp.W1 @ V) @ inv_sqrt.T)
    # S above whitens in the W2 eigenbasis: S = D^{-1/2} V' W1 V D^{-1/2}
    # conjugated back; either form has the same spectrum.
    vals, _ = _sym_eigh(S)
    vals = _clamp_psd_eigs(vals)[::-1]
    top = vals[:k].copy()
    return LargestRootResult(lam=lam, ell_max=float(top[0]), top_k=top)
