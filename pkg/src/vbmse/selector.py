"""MSE curves over the regularization parameter and the gamma line search.

Five estimates of the normalised noise-vector MSE

    MSE(gamma) = E ||x - x_hat(gamma)||^2 / n,
    x_hat      = (S + gamma I)^-1 S^1/2 (y - mu_hat),

are provided: a Monte-Carlo oracle, the semi-oracle trace form (true Sigma,
realised S), the plugin form (S in place of Sigma), the asymptotic form
(fixed points on the true Sigma) and the data-only consistent form that
the selector minimises.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from vbmse._io import SCHEMA_VERSION, atomic_writer
from vbmse.datagen import SyntheticModel, psd_sqrt, trial_rng
from vbmse.moments import SpectralMoments, _check_gamma, fit_moments, trace_functionals
from vbmse.rmt import ConsistentDeltas, _spectrum, consistent_deltas, solve_resolvent

VARIANT_NAMES = ("mc_oracle", "semi_oracle", "plugin", "asymptotic", "consistent")


class SelectorError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    """Log-spaced gamma grid ``[min_mult, max_mult] * scale``.

    ``scale`` is the mean SCM eigenvalue tr(S)/p, so the grid follows the
    units of the data.
    """

    min_mult: float = 1e-4
    max_mult: float = 1e3
    points: int = 200

    def __post_init__(self):
        if not (0 < self.min_mult < self.max_mult):
            raise ValueError("grid bounds must satisfy 0 < min_mult < max_mult")
        if self.points < 1:
            raise ValueError("grid needs at least one point")

    def gammas(self, scale: float) -> np.ndarray:
        if not scale > 0:
            raise SelectorError("cannot scale a gamma grid by a non-positive spectrum mean")
        if self.points == 1:
            return np.array([scale * np.sqrt(self.min_mult * self.max_mult)])
        return scale * np.logspace(np.log10(self.min_mult), np.log10(self.max_mult), self.points)

    def central_mask(self, gammas, scale: float, decades: float = 2.0) -> np.ndarray:
        """Points within ``decades/2`` decades of the grid's log-centre."""
        centre = 0.5 * (np.log10(self.min_mult) + np.log10(self.max_mult))
        x = np.log10(np.asarray(gammas) / scale)
        return np.abs(x - centre) <= decades / 2 + 1e-12


@dataclass(frozen=True)
class BracketVariant:
    """How the derivative terms of the consistent MSE are read.

    ``orientation`` says what a prime means: ``"dz"`` is the derivative in
    the resolvent argument ``z = -gamma``; ``"dgamma"`` the derivative in
    gamma.  ``sign`` multiplies the ``(1/n) tr[S (S + gamma I)^-2]`` term in
    the bracket.
    """

    orientation: str
    sign: int

    def __post_init__(self):
        if self.orientation not in ("dz", "dgamma") or self.sign not in (-1, 1):
            raise ValueError(f"invalid bracket variant {self}")

    @property
    def label(self) -> str:
        return f"{self.orientation}{'+' if self.sign > 0 else '-'}"

    @property
    def prime_sign(self) -> int:
        return -1 if self.orientation == "dz" else 1

    @classmethod
    def from_label(cls, label: str) -> "BracketVariant":
        return cls(label[:-1], 1 if label[-1] == "+" else -1)


BRACKET_VARIANTS = tuple(BracketVariant(o, s) for o in ("dz", "dgamma") for s in (-1, 1))
# Frozen output of vbmse.validation.sign_gate; a regression test re-runs the gate.
CONSISTENT_VARIANT = BracketVariant("dz", -1)


@dataclass(frozen=True)
class MseCurve:
    gammas: np.ndarray
    values: np.ndarray
    variant: str
    gamma_opt: float
    n: int
    p: int

    @property
    def mse_opt(self) -> float:
        return float(self.values[np.searchsorted(self.gammas, self.gamma_opt)])


def make_curve(gammas, values, variant: str, n: int, p: int) -> MseCurve:
    """Sort by gamma and pick the argmin, ties going to the smaller gamma."""
    gammas = np.asarray(gammas, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.argsort(gammas, kind="stable")
    gammas, values = gammas[order], values[order]
    if not np.all(np.isfinite(values)):
        raise SelectorError(f"non-finite {variant} MSE values on the grid")
    return MseCurve(gammas, values, variant, float(gammas[int(np.argmin(values))]), n, p)


@dataclass(frozen=True)
class NoiseEstimate:
    x_hat: np.ndarray
    gamma: float
    x_true: np.ndarray | None = None
    delta_vec: np.ndarray | None = None


def estimate_noise(sm: SpectralMoments, y, gamma: float, x_true=None, mu=None) -> NoiseEstimate:
    """``x_hat = (S + gamma I)^-1 S^1/2 (y - mu_hat)`` through the eigenbasis.

    ``mu`` (true mean, synthetic data only) fills ``delta_vec = mu - mu_hat``.
    """
    _check_gamma(gamma)
    V, lam = sm.eigenvectors, sm.eigenvalues
    c = V.T @ (np.asarray(y, dtype=float) - sm.mu_hat)
    x_hat = V @ (np.sqrt(lam) / (lam + gamma) * c)
    delta_vec = None if mu is None else np.asarray(mu, dtype=float) - sm.mu_hat
    return NoiseEstimate(x_hat, float(gamma), x_true, delta_vec)


# --- closed-form curves ---------------------------------------------------

def mse_plugin(sm: SpectralMoments, gamma) -> np.ndarray:
    g = _check_gamma(gamma)[..., None]
    lam, n = sm.eigenvalues, sm.n
    r = lam / (lam + g)
    return sm.p / n + (n + 1) / n * np.sum(r**2, axis=-1) / n - 2 * np.sum(r, axis=-1) / n


def _oracle_diagonals(sm: SpectralMoments, sigma_true, sigma_sqrt=None):
    sigma_true = np.asarray(sigma_true, dtype=float)
    if sigma_true.shape != (sm.p, sm.p):
        raise SelectorError(f"sigma_true has shape {sigma_true.shape}, expected {(sm.p, sm.p)}")
    if sigma_sqrt is None:
        sigma_sqrt = psd_sqrt(sigma_true)
    V = sm.eigenvectors
    return np.einsum("ij,ik,kj->j", V, sigma_true, V), np.einsum("ij,ik,kj->j", V, sigma_sqrt, V)


def _semi_from_diagonals(lam, w_sig, w_root, n, p, g):
    g = g[..., None]
    A = np.sum(w_sig * lam / (lam + g) ** 2, axis=-1) / n
    B = np.sum(w_root * np.sqrt(lam) / (lam + g), axis=-1) / n
    return p / n + (n + 1) / n * A - 2 * B


def mse_semi_oracle(sm: SpectralMoments, sigma_true, gamma, sigma_sqrt=None) -> np.ndarray:
    """Trace form of the MSE for one SCM realisation and the true covariance."""
    g = _check_gamma(gamma)
    w_sig, w_root = _oracle_diagonals(sm, sigma_true, sigma_sqrt)
    return _semi_from_diagonals(sm.eigenvalues, w_sig, w_root, sm.n, sm.p, g)


def mse_asymptotic(sigma_true, n: int, gamma, convention: str = "unit",
                   variant: BracketVariant = CONSISTENT_VARIANT) -> np.ndarray:
    """Large-dimensional limit of the MSE from the delta_1/delta_2 fixed points."""
    g_arr = _check_gamma(gamma)
    sig = _spectrum(sigma_true)
    p = sig.size
    out = np.empty(g_arr.shape)
    for idx, g in np.ndenumerate(g_arr):
        s1 = solve_resolvent(sig, n, -g, convention)
        s2 = solve_resolvent(np.sqrt(sig), n, 1j * np.sqrt(g), convention)
        dt = s1.delta_tilde
        # d delta_tilde/dz is what the fixed point returns; convert to the chosen reading
        dt_prime = variant.prime_sign * (-s1.delta_tilde_prime)
        phi = np.sum(sig**2 / (dt * sig + g) ** 2) / n
        A = (dt + g * dt_prime) * phi
        out[idx] = p / n + (n + 1) / n * A - 2 * np.real(s2.delta)
    return out if out.ndim else out[()]


def mse_consistent(cd: ConsistentDeltas, tf, n: int, p: int,
                   variant: BracketVariant = CONSISTENT_VARIANT) -> np.ndarray:
    """Data-only MSE estimate assembled from the consistent deltas.

    p/n - 2 Re(d2) + (n+1)/n (1+d1)^2 / d1' [ (dt1 + gamma dt1') d1' + sign * t ],
    with ``t = (1/n) tr[S (S + gamma I)^-2] = -a'`` and primes read per
    ``variant``.
    """
    s = variant.prime_sign
    d1p = s * np.asarray(cd.delta1_hat_prime)
    dt1p = s * np.asarray(cd.delta1_tilde_hat_prime)
    if np.any(d1p == 0):
        raise SelectorError("derivative singular: delta1_hat' = 0 (degenerate spectrum)")
    t = -np.asarray(tf.a_prime)
    g = np.asarray(cd.gamma)
    bracket = (cd.delta1_tilde_hat + g * dt1p) * d1p + variant.sign * t
    A = (1 + cd.delta1_hat) ** 2 / d1p * bracket
    return p / n - 2 * np.real(cd.delta2_hat) + (n + 1) / n * A


def consistent_curve_values(sm: SpectralMoments, gamma,
                            variant: BracketVariant = CONSISTENT_VARIANT) -> np.ndarray:
    tf = trace_functionals(sm, gamma)
    return mse_consistent(consistent_deltas(tf), tf, sm.n, sm.p, variant)


def select_gamma(sm: SpectralMoments, grid: GridConfig | None = None, gammas=None,
                 variant: BracketVariant = CONSISTENT_VARIANT) -> MseCurve:
    """Line search of the consistent MSE over a gamma grid.

    Grid points where the estimate cannot be formed are skipped; if none
    survive the last error is raised.
    """
    if gammas is None:
        gammas = (grid or GridConfig()).gammas(sm.mean_eigenvalue)
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    if gammas.size == 0:
        raise SelectorError("empty gamma grid")
    try:
        values = consistent_curve_values(sm, gammas, variant)
        keep = np.isfinite(values)
    except (ValueError, ArithmeticError):
        values = np.full(gammas.shape, np.nan)
        last = None
        for i, g in enumerate(gammas):
            try:
                values[i] = consistent_curve_values(sm, g, variant)
            except (ValueError, ArithmeticError) as exc:
                last = exc
        keep = np.isfinite(values)
        if not keep.any():
            raise last
    if not keep.any():
        raise SelectorError("consistent MSE is non-finite on the whole grid")
    return make_curve(gammas[keep], values[keep], "consistent", sm.n, sm.p)


# --- Monte-Carlo oracle ---------------------------------------------------

@dataclass(frozen=True)
class MonteCarloMse:
    """Per-trial squared errors (``mc``) and matched semi-oracle values (``semi``).

    Both arrays are ``trials x len(gammas)``.
    """

    gammas: np.ndarray
    mc: np.ndarray
    semi: np.ndarray

    @property
    def trials(self) -> int:
        return self.mc.shape[0]

    def mean(self) -> np.ndarray:
        return self.mc.mean(axis=0)

    def stderr(self) -> np.ndarray:
        return self.mc.std(axis=0, ddof=1) / np.sqrt(self.trials)

    def semi_mean(self) -> np.ndarray:
        return self.semi.mean(axis=0)


def mc_oracle_trials(model: SyntheticModel, n: int, gamma, trials: int,
                     seed: int | None = None, with_semi: bool = True) -> MonteCarloMse:
    """Simulate ``||x - x_hat||^2 / n`` over independent training sets.

    Each trial draws ``n`` training columns and one fresh observation from
    the model using its own ``(seed, trial)`` stream, so any trial can be
    regenerated in isolation.
    """
    if trials < 100:
        raise SelectorError("Monte-Carlo oracle needs at least 100 trials")
    g = np.atleast_1d(_check_gamma(gamma)).astype(float)
    seed = model.seed if seed is None else seed
    p = model.p
    mc = np.empty((trials, g.size))
    semi = np.empty((trials, g.size)) if with_semi else np.empty((0, g.size))
    gg = g[:, None]
    for k in range(trials):
        X = trial_rng(seed, k).standard_normal((p, n + 1))
        Y = model.mu[:, None] + model.sigma_sqrt @ X
        sm = fit_moments(Y[:, :n])
        x = X[:, n]
        V, lam = sm.eigenvectors, sm.eigenvalues
        c = V.T @ (Y[:, n] - sm.mu_hat)
        u = V.T @ x
        root = np.sqrt(lam)
        err = x @ x - 2 * np.sum(u * c * root / (lam + gg), axis=1) + np.sum(lam * c**2 / (lam + gg) ** 2, axis=1)
        mc[k] = err / n
        if with_semi:
            w_sig, w_root = _oracle_diagonals(sm, model.sigma, model.sigma_sqrt)
            semi[k] = _semi_from_diagonals(lam, w_sig, w_root, n, p, g)
    return MonteCarloMse(g, mc, semi)


def mse_mc_oracle(model: SyntheticModel, n: int, gamma, trials: int, seed: int | None = None):
    """Monte-Carlo mean and standard error of the normalised MSE."""
    res = mc_oracle_trials(model, n, gamma, trials, seed, with_semi=False)
    mean, se = res.mean(), res.stderr()
    if np.ndim(gamma) == 0:
        return float(mean[0]), float(se[0])
    return mean, se


# --- export ---------------------------------------------------------------

def write_curves_csv(path, gammas, columns: dict) -> None:
    """One row per gamma: ``gamma, mse_<variant>..., schema_version``."""
    gammas = np.asarray(gammas, dtype=float)
    names = list(columns)
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gamma", *(f"mse_{k}" for k in names), "schema_version"])
        for i, g in enumerate(gammas):
            w.writerow([repr(float(g)), *(repr(float(columns[k][i])) for k in names), SCHEMA_VERSION])
