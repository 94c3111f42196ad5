import numpy as np
import pytest

from ridgeroot.edge import EdgeParams
from ridgeroot.exceptions import InputError, MismatchedLambdaError
from ridgeroot.fmatrix import LargestRootResult
from ridgeroot.tracy_widom import (
    load_tw1_table,
    standardized_test,
    tw1_cdf,
    tw1_quantile,
)

# Published TW1 quantiles (Johnstone 2001 / RMTstat), the independent oracle
# for the shipped table.
PUBLISHED = {0.90: 0.4502, 0.95: 0.9793, 0.99: 2.0234, 0.05: -3.1803}


def make_params(lam=1.0, theta1=2.0, theta2=1.5):
    return EdgeParams(
        lam=lam, rho=3.0, beta=1.0, s_at_beta=0.5, s1_at_beta=1.0,
        s2_at_beta=2.0, theta1=theta1, theta2=theta2, is_discrete_edge=False,
    )


def test_table_invariants():
    table = load_tw1_table()
    assert np.all(np.diff(table.xs) > 0)
    assert np.all(np.diff(table.cdf) > 0)
    assert table.cdf[0] < 0.005
    assert table.cdf[-1] > 0.9995


def test_cdf_monotone_including_tails():
    xs = np.linspace(-14.0, 9.0, 400)  # crosses both grid boundaries
    vals = [tw1_cdf(x) for x in xs]
    assert np.all(np.diff(vals) > 0)
    assert 0.0 < vals[0] < vals[-1] < 1.0


@pytest.mark.parametrize("q,ref", sorted(PUBLISHED.items()))
def test_quantiles_match_published_values(q, ref):
    assert tw1_quantile(q) == pytest.approx(ref, abs=1e-3)


def test_quantile_cdf_round_trip():
    for x in np.linspace(-6.0, 4.0, 41):
        assert tw1_quantile(tw1_cdf(x)) == pytest.approx(x, abs=1e-6)


def test_quantile_rejects_bad_levels():
    with pytest.raises(InputError):
        tw1_quantile(0.0)
    with pytest.raises(InputError):
        tw1_quantile(1.0)


def test_statistic_centering():
    params = make_params()
    root = LargestRootResult(lam=1.0, ell_max=params.theta1, top_k=np.array([params.theta1]))
    report = standardized_test(root, params, p=64, alphas=(0.05,))
    assert report.statistic == pytest.approx(0.0, abs=1e-12)
    assert report.p_value == pytest.approx(1.0 - tw1_cdf(0.0), abs=1e-12)


def test_statistic_definition_and_threshold():
    params = make_params()
    p = 100
    cut = tw1_quantile(0.95)
    # ell_max placed so the statistic lands just above the 95% quantile
    ell = params.theta1 + (cut + 1e-6) * params.theta2 / p ** (2 / 3)
    root = LargestRootResult(lam=1.0, ell_max=ell, top_k=np.array([ell]))
    report = standardized_test(root, params, p=p, alphas=(0.05, 0.01))
    expected = p ** (2 / 3) * (ell - params.theta1) / params.theta2
    assert report.statistic == pytest.approx(expected, abs=1e-12)
    assert report.reject_at[0.05] is True
    assert report.reject_at[0.01] is False


def test_p_value_strictly_decreasing_in_statistic():
    params = make_params()
    scale = params.theta2 / 50 ** (2 / 3)
    pvals = []
    for stat in np.linspace(-5.0, 5.0, 25):  # beyond this, p saturates in float
        ell = params.theta1 + stat * scale
        root = LargestRootResult(lam=1.0, ell_max=ell, top_k=np.array([ell]))
        pvals.append(standardized_test(root, params, p=50).p_value)
    assert np.all(np.diff(pvals) < 0)


def test_lambda_mismatch_rejected():
    params = make_params(lam=1.0)
    root = LargestRootResult(lam=2.0, ell_max=1.0, top_k=np.array([1.0]))
    with pytest.raises(MismatchedLambdaError):
        standardized_test(root, params, p=10)
