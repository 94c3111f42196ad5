import numpy as np
import pytest

from ridgeroot.fmatrix import SscpPair
from ridgeroot.stieltjes import SpectrumView


def make_pair(W1, W2, n1, n2) -> SscpPair:
    """SscpPair from raw symmetric matrices (test helper)."""
    W1 = np.atleast_2d(np.asarray(W1, dtype=float))
    W2 = np.atleast_2d(np.asarray(W2, dtype=float))
    eigs = np.sort(np.linalg.eigvalsh(W2))[::-1]
    eigs[eigs < 0] = 0.0
    return SscpPair(W1=W1, W2=W2, n1=n1, n2=n2, w2_eigs=eigs)


def random_psd(rng, p, rank=None):
    rank = rank or p
    a = rng.standard_normal((p, rank))
    return a @ a.T / rank


def wishart_view(rng, p, n2, n1=None, sigma_eigs=None) -> SpectrumView:
    """Companion view of a white (or given-spectrum) Wishart W2 = A A'/n2."""
    n1 = n1 or n2
    a = rng.standard_normal((p, n2))
    if sigma_eigs is not None:
        a = np.sqrt(np.asarray(sigma_eigs))[:, None] * a
    w2 = a @ a.T / n2
    eigs = np.sort(np.linalg.eigvalsh(w2))[::-1]
    eigs[eigs < 0] = 0.0
    return SpectrumView.from_w2_eigs(eigs, p=p, n1=n1, n2=n2)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
