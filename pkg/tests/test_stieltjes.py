import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ridgeroot.exceptions import InputError, PoleHitError
from ridgeroot.stieltjes import SpectrumView, build_zgrid, q_hats, stieltjes

from conftest import wishart_view


def view_of(eigs, p=None, n1=None, n2=None):
    eigs = np.asarray(eigs, dtype=float)
    n2 = n2 or eigs.size
    return SpectrumView(eigs=np.sort(eigs)[::-1], n2=n2, p=p or eigs.size,
                        n1=n1 or n2)


def test_single_eigenvalue_transform():
    v = view_of([1.0])
    assert stieltjes(v, 1j) == pytest.approx(1 / (1 - 1j))
    assert stieltjes(v, 1j) == pytest.approx(0.5 + 0.5j)


def test_zero_padded_transform():
    # p=1 < n2=2: spectrum [2, 0]; phi(i) = (1/2)[(2+i)/5 + i] = 0.2 + 0.6i
    v = SpectrumView.from_w2_eigs([2.0], p=1, n1=2, n2=2)
    np.testing.assert_allclose(v.eigs, [2.0, 0.0])
    assert stieltjes(v, 1j) == pytest.approx(0.2 + 0.6j)


def test_companion_truncates_when_p_exceeds_n2():
    v = SpectrumView.from_w2_eigs([3.0, 2.0, 0.0, 0.0], p=4, n1=2, n2=2)
    np.testing.assert_allclose(v.eigs, [3.0, 2.0])
    assert v.gamma2_hat == pytest.approx(2.0)


def test_derivatives_match_finite_differences(rng):
    eigs = np.sort(rng.gamma(2.0, 1.0, size=50))[::-1]
    v = view_of(eigs)
    lam = 1.0
    z = complex(-lam)
    h = 1e-6
    fd1 = (stieltjes(v, z + h) - stieltjes(v, z - h)) / (2 * h)
    an1 = stieltjes(v, z, order=1)
    assert abs(fd1 - an1) / abs(an1) < 1e-6
    fd2 = (stieltjes(v, z + h, 1) - stieltjes(v, z - h, 1)) / (2 * h)
    an2 = stieltjes(v, z, order=2)
    assert abs(fd2 - an2) / abs(an2) < 1e-5


def test_pole_detection():
    v = view_of([1.0, 2.0])
    with pytest.raises(PoleHitError):
        stieltjes(v, 2.0 + 0.0j)


@settings(max_examples=40, deadline=None)
@given(
    eigs=st.lists(st.floats(0.0, 50.0), min_size=1, max_size=12),
    re=st.floats(-30.0, 60.0),
    im=st.floats(1e-6, 10.0),
)
def test_herglotz_and_conjugate_symmetry(eigs, re, im):
    v = view_of(np.array(eigs) if any(eigs) else np.array(eigs) + 1.0)
    z = complex(re, im)
    val = stieltjes(v, z)
    assert val.imag > 0  # maps C+ into C+
    conj = stieltjes(v, z.conjugate())
    assert conj == pytest.approx(val.conjugate())


def test_q_hats_single_atom():
    # gamma2 = 1, lambda = 1, z = i: Q1 = i + 2/(1+i) = 1; Q2 = 4/(1+i)^2 - 2/i = 0.
    v = view_of([1.0])
    q1, q2 = q_hats(v, 1.0, 1j)
    assert q1 == pytest.approx(1.0 + 0.0j, abs=1e-14)
    assert q2 == pytest.approx(0.0 + 0.0j, abs=1e-14)


def test_q_hats_requires_upper_half_plane():
    v = view_of([1.0])
    with pytest.raises(InputError):
        q_hats(v, 1.0, complex(0.5, -1.0))


def test_q1_matches_mp_selfconsistency(rng):
    # White Wishart p = n2 = 400: Q1(z) ~ 1/(lambda + lambda*phi(z)).
    v = wishart_view(rng, p=400, n2=400)
    lam = 1.0
    grid = build_zgrid(v, lam, 40)
    for z, phi in zip(grid.points, grid.targets):
        q1, _ = q_hats(v, lam, z)
        ref = 1.0 / (lam + lam * phi)
        assert abs(q1 - ref) / abs(ref) < 5e-2


def test_zgrid_endpoints_single_atom():
    # eigs=[1], lambda=1: Re targets span [phi(1.05), phi(-1)] = [-20, 0.5].
    v = view_of([1.0])
    grid = build_zgrid(v, 1.0, 2)
    assert grid.targets[0].real == pytest.approx(-20.0, rel=1e-9)
    assert grid.targets[-1].real == pytest.approx(0.5, rel=1e-9)
    np.testing.assert_allclose(grid.targets.imag, 0.01, rtol=1e-9)


def test_zgrid_round_trip(rng):
    v = wishart_view(rng, p=60, n2=90)
    grid = build_zgrid(v, 0.7, 50)
    for z, target in zip(grid.points, grid.targets):
        assert abs(stieltjes(v, z) - target) <= 1e-10
        assert z.imag > 0


def test_zgrid_on_mp_spectrum(rng):
    # gamma2 = 0.5 Marchenko-Pastur sample: all inversions succeed.
    v = wishart_view(rng, p=200, n2=400)
    grid = build_zgrid(v, 1.0, 100)
    assert len(grid) == 100
    assert np.all(grid.points.imag > 0)


def test_q1_second_derivative_matches_finite_differences():
    from ridgeroot.stieltjes import q_second_derivative

    v = wishart_view(np.random.default_rng(5), p=40, n2=60)
    lam = 0.8
    z = complex(1.5 * v.l_max, 0.3)
    step = 1e-4
    q_up, _ = q_hats(v, lam, z + step)
    q_mid, _ = q_hats(v, lam, z)
    q_dn, _ = q_hats(v, lam, z - step)
    fd = (q_up - 2 * q_mid + q_dn) / step**2
    an = q_second_derivative(v, lam, z)
    assert abs(fd - an) / abs(an) < 1e-4


@pytest.mark.slow
@pytest.mark.parametrize("p,n2,bound", [(400, 800, 0.1), (800, 1600, 0.05)])
def test_mp_residual_shrinks_with_dimension(p, n2, bound):
    # Finite-sample Marchenko-Pastur residual at Sigma = I over the z grid.
    rng = np.random.default_rng(1234)  # same seed family for both sizes
    v = wishart_view(rng, p=p, n2=n2)
    lam = 1.0
    grid = build_zgrid(v, lam, 60)
    gamma2 = v.gamma2_hat
    worst = 0.0
    for z, phi in zip(grid.points, grid.targets):
        resid = z + 1.0 / phi - gamma2 / (phi + 1.0)
        worst = max(worst, abs(resid))
    assert worst < bound
