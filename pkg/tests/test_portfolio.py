import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.covariance import LedoitWolf

from vbmse.datagen import ar1_sigma
from vbmse.moments import fit_moments
from vbmse.portfolio import (
    PortfolioError,
    equal_weights,
    gmvp_weights,
    gmvp_weights_true,
    lw_weights,
    pinv_weights,
)


def _kkt(C):
    # minimise w' C w subject to 1' w = 1
    p = C.shape[0]
    K = np.block([[2 * C, np.ones((p, 1))], [np.ones((1, p)), np.zeros((1, 1))]])
    rhs = np.zeros(p + 1)
    rhs[-1] = 1.0
    return np.linalg.solve(K, rhs)[:p]


@given(p=st.integers(2, 30), n=st.integers(2, 40), seed=st.integers(0, 1000), mult=st.floats(1e-2, 1e2))
def test_rscm_weights_match_kkt(p, n, seed, mult):
    sm = fit_moments(np.random.default_rng(seed).normal(size=(p, n)))
    g = mult * max(sm.mean_eigenvalue, 1e-8)
    w = gmvp_weights(sm, g).weights
    ref = _kkt(sm.sigma_hat + g * np.eye(p))
    np.testing.assert_allclose(w, ref, rtol=1e-7, atol=1e-9)
    assert abs(w.sum() - 1) <= 1e-12


def test_true_weights():
    sigma = ar1_sigma(5, 0.4)
    np.testing.assert_allclose(gmvp_weights_true(sigma).weights, _kkt(sigma), rtol=1e-10)
    with pytest.raises(PortfolioError, match="singular"):
        gmvp_weights_true(np.ones((3, 3)))


def test_pinv_matches_numpy(rng):
    Y = rng.normal(size=(10, 6))
    sm = fit_moments(Y)
    u = np.linalg.pinv(np.cov(Y), rcond=1e-10) @ np.ones(10)
    np.testing.assert_allclose(pinv_weights(sm).weights, u / u.sum(), rtol=1e-8)


def test_pinv_full_rank_is_inverse(rng):
    sm = fit_moments(rng.normal(size=(4, 30)))
    np.testing.assert_allclose(pinv_weights(sm).weights, _kkt(sm.sigma_hat), rtol=1e-9)


def test_equal_weights():
    w = equal_weights(4).weights
    np.testing.assert_array_equal(w, [0.25] * 4)


def test_lw_matches_sklearn(rng):
    Y = rng.normal(size=(8, 20)) * np.linspace(0.5, 2, 8)[:, None]
    pw = lw_weights(Y)
    lw = LedoitWolf().fit(Y.T)
    assert pw.shrinkage == pytest.approx(lw.shrinkage_, rel=1e-12)
    S = np.cov(Y)
    target = (1 - pw.shrinkage) * S + pw.shrinkage * np.trace(S) / 8 * np.eye(8)
    np.testing.assert_allclose(pw.weights, _kkt(target), rtol=1e-8)
    assert 0 <= pw.shrinkage <= 1


def test_zero_denominator():
    from vbmse.portfolio import _normalise

    with pytest.raises(PortfolioError):
        _normalise(np.array([1.0, -1.0]), "x")


def test_gamma_must_be_positive(rng):
    sm = fit_moments(rng.normal(size=(3, 5)))
    with pytest.raises(ValueError):
        gmvp_weights(sm, 0.0)
