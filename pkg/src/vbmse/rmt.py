"""Deterministic equivalents of SCM resolvent traces and their estimators.

Conventions
-----------
The fixed point behind every deterministic equivalent is, for a spectrum
``s`` (eigenvalues of the population matrix), sample count ``n`` and a
point ``z`` off the positive real axis::

    delta       = (1/n) sum_j s_j / (delta_tilde * s_j - z)
    delta_tilde = kappa / (1 + delta)

``kappa = 1`` is the default (``convention="unit"``).  ``"trace_t"`` uses
``kappa = (n - 1)/n``, the value of ``(1/n) tr[T (delta T + I)^-1]`` for the
rank-(n-1) centring projector ``T``.

``delta_1`` is this fixed point on the spectrum of ``Sigma`` at ``z = -gamma``;
``delta_2`` on the spectrum of ``Sigma^1/2`` at ``z = i sqrt(gamma)``.

Derivatives stored on :class:`FixedPointSolution` are taken with respect
to ``z``.  The data-driven :class:`ConsistentDeltas` carry derivatives with
respect to ``gamma``; at ``z = -gamma`` the two differ by a sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vbmse.datagen import SyntheticModel, generate, psd_sqrt
from vbmse.moments import TraceFunctionals, sample_cov

DAMPING = 0.5
TOL = 1e-12
MAX_ITER = 1000
NEWTON_MAX_ITER = 200
CONVENTIONS = ("unit", "trace_t")


class FixedPointError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(f"{msg} (last residual {residual:.3e})")
        self.residual = residual


class ResolventBoundaryError(ValueError):
    pass


@dataclass(frozen=True)
class FixedPointSolution:
    delta: complex | float
    delta_tilde: complex | float
    iterations: int
    residual: float
    z: complex
    delta_prime: complex | float  # d delta / dz
    delta_tilde_prime: complex | float  # d delta_tilde / dz
    kappa: float = 1.0


@dataclass(frozen=True)
class ConsistentDeltas:
    delta1_hat: np.ndarray
    delta1_hat_prime: np.ndarray  # d/dgamma
    delta1_tilde_hat: np.ndarray
    delta1_tilde_hat_prime: np.ndarray  # d/dgamma
    delta2_hat: np.ndarray
    gamma: np.ndarray


def _kappa(n: int, convention: str) -> float:
    if convention == "unit":
        return 1.0
    if convention == "trace_t":
        return (n - 1) / n
    raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")


def solve_resolvent(spectrum, n: int, z, convention: str = "unit",
                    tol: float = TOL, max_iter: int = MAX_ITER) -> FixedPointSolution:
    """Solve the scalar fixed point for ``spectrum`` at ``z``.

    Damped iteration ``delta <- (1-w) delta + w F(delta)`` (w=0.5) from
    ``delta = 1``.  Near the critical aspect ratio with small ``|z|`` the
    contraction rate approaches 1; if the damped loop has not met the
    tolerance after ``max_iter`` steps, Newton's method on
    ``delta - F(delta)`` finishes from the last iterate.
    """
    s = np.asarray(spectrum, dtype=float)
    kappa = _kappa(n, convention)
    is_real = np.isrealobj(z) or np.imag(z) == 0
    z = float(np.real(z)) if is_real else complex(z)
    if is_real and z >= 0:
        raise ValueError("real z must be negative")

    def F(d):
        dt = kappa / (1 + d)
        return np.sum(s / (dt * s - z)) / n

    def dF(d):
        dt = kappa / (1 + d)
        return np.sum(s**2 / (dt * s - z) ** 2) / n * dt**2 / kappa

    d = 1.0 if is_real else 1.0 + 0j
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        f = F(d)
        res = abs(f - d)
        if res <= tol * (1 + abs(d)):
            break
        d = (1 - DAMPING) * d + DAMPING * f
    else:
        for k in range(1, NEWTON_MAX_ITER + 1):
            g = d - F(d)
            step = g / (1 - dF(d))
            d_new = d - step
            if is_real and d_new <= 0:
                d_new = 0.5 * d
            d = d_new
            res = abs(F(d) - d)
            if res <= tol * (1 + abs(d)):
                it = max_iter + k
                break
        else:
            raise FixedPointError("fixed point did not converge", res)

    dt = kappa / (1 + d)
    psi = np.sum(s / (dt * s - z) ** 2) / n
    phi = np.sum(s**2 / (dt * s - z) ** 2) / n
    d_prime = psi / (1 - phi * dt**2 / kappa)
    dt_prime = -(dt**2 / kappa) * d_prime
    if is_real:
        d, dt, d_prime, dt_prime = (float(np.real(v)) for v in (d, dt, d_prime, dt_prime))
    return FixedPointSolution(d, dt, it, float(res), z, d_prime, dt_prime, kappa)


def _spectrum(sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    return np.clip(np.linalg.eigvalsh(0.5 * (sigma + sigma.T)), 0.0, None)


def solve_delta1(sigma, n: int, gamma: float, convention: str = "unit") -> FixedPointSolution:
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return solve_resolvent(_spectrum(sigma), n, -float(gamma), convention)


def solve_delta2(sigma, n: int, gamma: float, convention: str = "unit") -> FixedPointSolution:
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return solve_resolvent(np.sqrt(_spectrum(sigma)), n, 1j * np.sqrt(gamma), convention)


def consistent_deltas(tf: TraceFunctionals) -> ConsistentDeltas:
    """Data-only estimates of delta_1, delta_2 and the gamma-derivatives of delta_1."""
    a = np.asarray(tf.a)
    if np.any(a >= 1 - 1e-12):
        raise ResolventBoundaryError("resolvent trace at unit boundary (a >= 1)")
    one_minus = 1 - a
    return ConsistentDeltas(
        delta1_hat=a / one_minus,
        delta1_hat_prime=tf.a_prime / one_minus**2,
        delta1_tilde_hat=one_minus,
        delta1_tilde_hat_prime=-np.asarray(tf.a_prime),
        delta2_hat=tf.b / (1 - tf.b),
        gamma=tf.gamma,
    )


# --- deterministic-equivalent relations -----------------------------------

RELATIONS = (1, 2, 3, 4)


def _lhs_traces(lam, m, z):
    """Traces of Theta against resolvents of one SCM realisation.

    ``m`` is diag(U^T Theta U) in the SCM eigenbasis.
    """
    r = 1.0 / (lam - z)
    return {1: np.sum(m * r), 2: np.sum(m * lam * r), 3: np.sum(m * r**2), 4: np.sum(m * lam * r**2)}


def _rhs_traces(sig, t, sol: FixedPointSolution, printed: bool):
    """Deterministic equivalents; ``t`` is diag(W^T Theta W) in Sigma's eigenbasis.

    ``printed=True`` evaluates relations 2 and 3 in their typeset form,
    which omits a factor of Sigma (and for 3 the ``delta_tilde'`` term).
    """
    dt, dtp, z = sol.delta_tilde, sol.delta_tilde_prime, sol.z
    q = 1.0 / (dt * sig - z)
    out = {1: np.sum(t * q), 4: (dt - z * dtp) * np.sum(t * sig * q**2)}
    if printed:
        out[2] = dt * np.sum(t * q)
        out[3] = np.sum(t * sig * q**2)
    else:
        out[2] = dt * np.sum(t * sig * q)
        out[3] = np.sum(t * (1 - dtp * sig) * q**2)
    return out


def de_relation_deviations(sigma, thetas: dict, n: int, gamma: float, reps: int,
                           seed: int = 0, z=None, printed: bool = False,
                           convention: str = "unit") -> dict:
    """Relative deviation ``|mean LHS - RHS| / |RHS|`` of every relation.

    One set of ``reps`` simulated datasets (zero-mean model ``Y = Sigma^1/2 X``)
    is shared by all relations and all test matrices.  Returns
    ``{(which, theta_name): deviation}``.
    """
    sigma = np.asarray(sigma, dtype=float)
    p = sigma.shape[0]
    z = -float(gamma) if z is None else z
    sig, W = np.linalg.eigh(sigma)
    sig = np.clip(sig, 0.0, None)
    sol = solve_resolvent(sig, n, z, convention)
    model = SyntheticModel(sigma, np.zeros(p), seed=seed, sigma_sqrt=(W * np.sqrt(sig)) @ W.T)

    rhs = {name: _rhs_traces(sig, np.einsum("ij,ik,kj->j", W, th, W), sol, printed)
           for name, th in thetas.items()}
    acc = {name: dict.fromkeys(RELATIONS, 0.0) for name in thetas}
    for rep in range(reps):
        Y, _ = generate(model, n, trial=rep)
        lam, U = np.linalg.eigh(sample_cov(Y))
        lam = np.clip(lam, 0.0, None)
        for name, th in thetas.items():
            tr = _lhs_traces(lam, np.einsum("ij,ik,kj->j", U, th, U), z)
            for k in RELATIONS:
                acc[name][k] += tr[k] / reps

    out = {}
    for name in thetas:
        for k in RELATIONS:
            lhs, r = acc[name][k], rhs[name][k]
            if abs(r) == 0:
                out[(k, name)] = 0.0 if abs(lhs) == 0 else np.inf
            else:
                out[(k, name)] = float(abs(lhs - r) / abs(r))
    return out


def de_relation_check(sigma, theta, n: int, gamma: float, which: int, reps: int,
                      seed: int = 0, z=None, printed: bool = False) -> float:
    if which not in RELATIONS:
        raise ValueError(f"which must be one of {RELATIONS}")
    devs = de_relation_deviations(sigma, {"theta": np.asarray(theta, dtype=float)}, n, gamma,
                                  reps, seed=seed, z=z, printed=printed)
    return devs[(which, "theta")]


__all__ = [
    "ConsistentDeltas",
    "FixedPointError",
    "FixedPointSolution",
    "ResolventBoundaryError",
    "consistent_deltas",
    "de_relation_check",
    "de_relation_deviations",
    "psd_sqrt",
    "solve_delta1",
    "solve_delta2",
    "solve_resolvent",
]
