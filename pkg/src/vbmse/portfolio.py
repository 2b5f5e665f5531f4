"""Global minimum-variance portfolio weights ``C^-1 1 / (1^T C^-1 1)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.covariance import ledoit_wolf

from vbmse.moments import SpectralMoments, _check_gamma, fit_moments, spectral


class PortfolioError(ValueError):
    pass


@dataclass(frozen=True)
class PortfolioWeights:
    weights: np.ndarray
    method: str
    gamma_used: float | None = None
    shrinkage: float | None = None


def _normalise(u, method, **kw) -> PortfolioWeights:
    total = u.sum()
    if not np.isfinite(total) or abs(total) < 1e-300:
        raise PortfolioError(f"{method}: 1^T C^-1 1 is zero or non-finite; weights undefined")
    w = u / total
    # one more pass removes rounding left by the first division
    w = w / w.sum()
    return PortfolioWeights(w, method, **kw)


def gmvp_weights(sm: SpectralMoments, gamma: float, method: str = "rscm") -> PortfolioWeights:
    """GMVP weights for ``S + gamma I`` using the cached eigendecomposition."""
    _check_gamma(gamma)
    V, lam = sm.eigenvectors, sm.eigenvalues
    u = V @ ((V.T @ np.ones(sm.p)) / (lam + gamma))
    return _normalise(u, method, gamma_used=float(gamma))


def gmvp_weights_true(sigma_true, method: str = "true_gmvp") -> PortfolioWeights:
    sigma = np.asarray(sigma_true, dtype=float)
    p = sigma.shape[0]
    if np.linalg.cond(sigma) > 1 / np.finfo(float).eps:
        raise PortfolioError("covariance is singular")
    try:
        u = np.linalg.solve(sigma, np.ones(p))
    except np.linalg.LinAlgError as exc:
        raise PortfolioError("covariance is singular") from exc
    return _normalise(u, method)


def pinv_weights(sm: SpectralMoments, rtol: float = 1e-10) -> PortfolioWeights:
    """GMVP with the Moore-Penrose pseudo-inverse of the SCM."""
    V, lam = sm.eigenvectors, sm.eigenvalues
    cutoff = rtol * lam[0] if lam[0] > 0 else np.inf
    inv = np.where(lam > cutoff, 1.0 / np.where(lam > cutoff, lam, 1.0), 0.0)
    u = V @ (inv * (V.T @ np.ones(sm.p)))
    return _normalise(u, "scm_pinv")


def equal_weights(p: int) -> PortfolioWeights:
    return PortfolioWeights(np.full(p, 1.0 / p), "equal_weight")


def lw_weights(train) -> PortfolioWeights:
    """GMVP on the Ledoit-Wolf shrinkage of the SCM towards a scaled identity.

    The shrunk matrix is ``(1 - s) S + s (tr S / p) I`` with intensity
    ``s`` in [0, 1]; the SCM here uses the ``n - 1`` denominator.
    """
    train = np.asarray(train, dtype=float)
    sm = fit_moments(train)
    _, s = ledoit_wolf(train.T)
    s = float(np.clip(s, 0.0, 1.0))
    shrunk = (1 - s) * sm.sigma_hat + s * sm.mean_eigenvalue * np.eye(sm.p)
    sm_lw = spectral(shrunk, sm.mu_hat, sm.n)
    V, lam = sm_lw.eigenvectors, sm_lw.eigenvalues
    if lam[-1] <= 0:
        raise PortfolioError("Ledoit-Wolf estimate is singular")
    u = V @ ((V.T @ np.ones(sm.p)) / lam)
    return _normalise(u, "lw", gamma_used=s * sm.mean_eigenvalue, shrinkage=s)
