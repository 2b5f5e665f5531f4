"""Sample moments of a training window and the resolvent traces built on them.

Everything downstream (MSE estimators, GMVP weights) reads the spectrum of
the sample covariance, so it is factorised once per window and every
function of ``(Sigma_hat + gamma I)^-1`` is then O(p) per gamma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYMMETRY_RTOL = 1e-10
NEGATIVE_EIG_RTOL = 1e-10


class MomentsError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralMoments:
    mu_hat: np.ndarray
    sigma_hat: np.ndarray
    eigenvalues: np.ndarray  # non-increasing, clamped at 0
    eigenvectors: np.ndarray  # columns match eigenvalues
    n: int

    @property
    def p(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def aspect_ratio(self) -> float:
        return self.p / self.n

    @property
    def mean_eigenvalue(self) -> float:
        """tr(Sigma_hat) / p, the scale used for gamma grids."""
        return float(self.eigenvalues.sum() / self.p)

    @property
    def sqrt_eigenvalues(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    def sqrt(self) -> np.ndarray:
        """Symmetric PSD square root of ``sigma_hat``."""
        V = self.eigenvectors
        return (V * self.sqrt_eigenvalues) @ V.T

    def rank(self, rtol: float = 1e-10) -> int:
        lam = self.eigenvalues
        if lam[0] <= 0:
            return 0
        return int(np.count_nonzero(lam > rtol * lam[0]))


@dataclass(frozen=True)
class TraceFunctionals:
    """Normalised resolvent traces of the SCM at ``gamma``.

    a       = (1/n) tr[S (S + g I)^-1]
    a_prime = da/dg = -(1/n) tr[S (S + g I)^-2]
    b       = (1/n) tr[S^1/2 (S^1/2 - i sqrt(g) I)^-1]

    Fields are scalars or arrays matching the shape of ``gamma``.
    """

    a: np.ndarray
    a_prime: np.ndarray
    b: np.ndarray
    gamma: np.ndarray
    n: int
    p: int


def sample_mean(train) -> np.ndarray:
    train = np.asarray(train, dtype=float)
    if train.ndim != 2 or train.shape[1] < 1:
        raise MomentsError(f"expected a p x n matrix with n >= 1, got shape {train.shape}")
    return train.mean(axis=1)


def sample_cov(train) -> np.ndarray:
    """SCM with denominator ``n - 1``, centred at the sample mean."""
    train = np.asarray(train, dtype=float)
    if train.ndim != 2:
        raise MomentsError(f"expected a p x n matrix, got shape {train.shape}")
    n = train.shape[1]
    if n < 2:
        raise MomentsError("degenerate SCM: need at least 2 observations")
    B = train - sample_mean(train)[:, None]
    S = B @ B.T / (n - 1)
    return 0.5 * (S + S.T)


def spectral(sigma_hat, mu_hat, n: int) -> SpectralMoments:
    S = np.asarray(sigma_hat, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise MomentsError(f"sigma_hat must be square, got shape {S.shape}")
    scale = max(float(np.max(np.abs(S))), np.finfo(float).tiny)
    if np.max(np.abs(S - S.T)) > SYMMETRY_RTOL * scale:
        raise MomentsError("sigma_hat is not symmetric")
    S = 0.5 * (S + S.T)
    lam, V = np.linalg.eigh(S)
    lam, V = lam[::-1], V[:, ::-1]
    if lam.size and lam[-1] < -NEGATIVE_EIG_RTOL * np.max(np.abs(lam)):
        raise MomentsError(f"sigma_hat is not PSD (min eigenvalue {lam[-1]:.3e})")
    lam = np.clip(lam, 0.0, None)
    mu = np.asarray(mu_hat, dtype=float)
    if mu.shape != (S.shape[0],):
        raise MomentsError(f"mu_hat has shape {mu.shape}, expected ({S.shape[0]},)")
    for arr in (mu, S, lam, V):
        arr.setflags(write=False)
    return SpectralMoments(mu, S, np.ascontiguousarray(lam), np.ascontiguousarray(V), int(n))


def fit_moments(train) -> SpectralMoments:
    """Sample mean, SCM and its eigendecomposition for one training window."""
    train = np.asarray(train, dtype=float)
    return spectral(sample_cov(train), sample_mean(train), train.shape[1])


def _check_gamma(gamma) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    if np.any(~(g > 0)):
        raise MomentsError("gamma must be strictly positive")
    return g


def trace_functionals(sm: SpectralMoments, gamma) -> TraceFunctionals:
    g = _check_gamma(gamma)
    lam = sm.eigenvalues
    gg = g[..., None]
    ratio = lam / (lam + gg)
    a = ratio.sum(axis=-1) / sm.n
    a_prime = -(ratio / (lam + gg)).sum(axis=-1) / sm.n
    s = sm.sqrt_eigenvalues
    b = (s / (s - 1j * np.sqrt(gg))).sum(axis=-1) / sm.n
    return TraceFunctionals(a, a_prime, b, g, sm.n, sm.p)
