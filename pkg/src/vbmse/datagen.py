"""Gaussian returns ``y = mu + Sigma^1/2 x`` with structured covariances."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def psd_sqrt(sigma) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition."""
    sigma = np.asarray(sigma, dtype=float)
    w, V = np.linalg.eigh(0.5 * (sigma + sigma.T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Independent stream for ``(seed, trial)``; same pair, same numbers."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


@dataclass(frozen=True)
class SyntheticModel:
    sigma: np.ndarray
    mu: np.ndarray
    seed: int = 0
    sigma_sqrt: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError(f"sigma must be square, got {sigma.shape}")
        mu = np.broadcast_to(np.asarray(self.mu, dtype=float), (sigma.shape[0],)).copy()
        root = psd_sqrt(sigma) if self.sigma_sqrt is None else np.asarray(self.sigma_sqrt, dtype=float)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma_sqrt", root)

    @property
    def p(self) -> int:
        return self.sigma.shape[0]


def ar1_sigma(p: int, rho: float) -> np.ndarray:
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be < 1, got {rho}")
    i = np.arange(p)
    return float(rho) ** np.abs(i[:, None] - i[None, :])


def factor_sigma(p: int, k: int = 3, seed: int = 0, factor_vol: float = 0.01,
                 idio_vol: tuple[float, float] = (0.01, 0.03)) -> np.ndarray:
    """Daily-scale covariance ``B diag(f^2) B^T + D`` for a k-factor market.

    The first factor is a market factor with loadings around 1; the rest
    are sector-like with zero-mean loadings.  Idiosyncratic volatilities
    are uniform on ``idio_vol``.
    """
    rng = trial_rng(seed, 0)
    B = rng.normal(0.0, 0.5, size=(p, k))
    B[:, 0] += 1.0
    f = np.full(k, factor_vol)
    d = rng.uniform(*idio_vol, size=p)
    sigma = (B * f**2) @ B.T + np.diag(d**2)
    return 0.5 * (sigma + sigma.T)


def generate(model: SyntheticModel, n: int, trial: int = 0):
    """Draw ``n`` columns ``mu + Sigma^1/2 x_j``.

    Returns ``(Y, X)`` with ``X`` the latent standard-normal draws.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    X = trial_rng(model.seed, trial).standard_normal((model.p, n))
    Y = model.mu[:, None] + model.sigma_sqrt @ X
    return Y, X


def parse_synth_spec(text: str) -> dict:
    """Parse ``p=..,n=..,rho=..,mu=..`` into a dict of numbers."""
    out = {}
    for part in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in part:
            raise ValueError(f"bad synth term {part!r}; expected key=value")
        key, val = (s.strip() for s in part.split("=", 1))
        if key not in ("p", "n", "rho", "mu", "T", "k"):
            raise ValueError(f"unknown synth key {key!r}")
        out[key] = int(val) if key in ("p", "n", "T", "k") else float(val)
    return out
