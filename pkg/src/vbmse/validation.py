"""Numerical checks tying the estimators to Monte-Carlo and fixed-point oracles.

All checks run on the AR(1) model ``[Sigma]_ij = 0.6^|i-j|``, ``mu = 1``.
A failed check is a result, not an exception.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from vbmse._io import SCHEMA_VERSION
from vbmse.datagen import SyntheticModel, ar1_sigma, generate
from vbmse.moments import fit_moments, trace_functionals
from vbmse.rmt import consistent_deltas, de_relation_deviations, solve_delta1, solve_delta2
from vbmse.selector import (
    BRACKET_VARIANTS,
    CONSISTENT_VARIANT,
    BracketVariant,
    GridConfig,
    mc_oracle_trials,
    mse_asymptotic,
    mse_consistent,
    mse_semi_oracle,
)

RHO = 0.6
DE_TOL = 0.05
MC_TOL_SE = 3.0
MC_GAMMA_MULTS = (0.1, 1.0, 10.0)


@dataclass
class CheckResult:
    name: str
    deviation: float
    tolerance: float
    passed: bool
    reps: int
    p: int
    n: int
    seed: int
    detail: str = ""


@dataclass
class GateResult:
    chosen: BracketVariant
    scores: dict = field(default_factory=dict)  # label -> median deviation

    @property
    def matches_frozen(self) -> bool:
        return self.chosen == CONSISTENT_VARIANT


def ar1_model(p: int, seed: int = 0) -> SyntheticModel:
    return SyntheticModel(ar1_sigma(p, RHO), np.ones(p), seed=seed)


def _check(name, dev, tol, p, n, reps, seed, detail="", override=None):
    tol = tol if override is None else override
    dev = float(dev)
    return CheckResult(name, dev, tol, bool(dev <= tol), reps, p, n, seed, detail)


def consistent_vs_semi(model: SyntheticModel, n: int, reps: int, seed: int,
                       variants=(CONSISTENT_VARIANT,), grid: GridConfig | None = None) -> dict:
    """Median over reps of the median relative deviation |consistent - semi| / semi
    over the central two decades of each rep's grid."""
    grid = grid or GridConfig()
    per = {v.label: [] for v in variants}
    for rep in range(reps):
        Y, _ = generate(model, n, trial=rep)
        sm = fit_moments(Y)
        scale = sm.mean_eigenvalue
        g = grid.gammas(scale)
        g = g[grid.central_mask(g, scale)]
        semi = mse_semi_oracle(sm, model.sigma, g, model.sigma_sqrt)
        tf = trace_functionals(sm, g)
        cd = consistent_deltas(tf)
        for v in variants:
            cons = mse_consistent(cd, tf, sm.n, sm.p, v)
            per[v.label].append(np.median(np.abs(cons - semi) / np.abs(semi)))
    return {k: float(np.median(v)) for k, v in per.items()}


def sign_gate(p: int = 100, n: int = 100, reps: int = 20, seed: int = 0) -> GateResult:
    """Pick the reading of the consistent-MSE bracket that tracks the semi-oracle best."""
    scores = consistent_vs_semi(ar1_model(p, seed), n, reps, seed, BRACKET_VARIANTS)
    best = min(BRACKET_VARIANTS, key=lambda v: (scores[v.label], v.label))
    return GateResult(best, scores)


def delta_consistency(model: SyntheticModel, n: int, gamma: float, reps: int) -> tuple[float, float]:
    """Median relative errors of delta1_hat vs delta1 and Re delta2_hat vs Re delta2."""
    s1 = solve_delta1(model.sigma, n, gamma)
    s2 = solve_delta2(model.sigma, n, gamma)
    e1, e2 = [], []
    for rep in range(reps):
        Y, _ = generate(model, n, trial=rep)
        cd = consistent_deltas(trace_functionals(fit_moments(Y), gamma))
        e1.append(abs(float(cd.delta1_hat) - s1.delta) / s1.delta)
        e2.append(abs(np.real(cd.delta2_hat) - np.real(s2.delta)) / abs(np.real(s2.delta)))
    return float(np.median(e1)), float(np.median(e2))


def asymptotic_vs_mc(model: SyntheticModel, n: int, trials: int, seed: int,
                     grid: GridConfig | None = None):
    """Median relative gap between the asymptotic curve and the MC curve over
    the central two decades (grid scaled by tr(Sigma)/p)."""
    grid = grid or GridConfig()
    scale = float(np.trace(model.sigma) / model.p)
    g = grid.gammas(scale)
    g = g[grid.central_mask(g, scale)]
    mc = mc_oracle_trials(model, n, g, trials, seed=seed, with_semi=False).mean()
    asy = mse_asymptotic(model.sigma, n, g)
    return float(np.median(np.abs(asy - mc) / mc)), g, asy, mc


def run_suite(p: int = 100, n: int = 100, reps: int = 20, seed: int = 0,
              tolerance: float | None = None, mc_trials: int | None = None):
    """Run every check; returns ``(checks, gate)``.

    ``tolerance`` overrides every check's tolerance (0 makes the suite fail
    unless a deviation is exactly zero).
    """
    if p < 20 or n < 20:
        raise ValueError("suite needs p, n >= 20")
    model = ar1_model(p, seed)
    scale = float(np.trace(model.sigma) / p)
    checks = []
    mk = lambda name, dev, tol, detail="": _check(name, dev, tol, p, n, reps, seed, detail, tolerance)

    thetas = {"I": np.eye(p), "Sigma": model.sigma}
    devs = de_relation_deviations(model.sigma, thetas, n, scale, reps, seed=seed)
    for (k, name), dev in sorted(devs.items()):
        checks.append(mk(f"de_relation_{k}_theta_{name}", dev, DE_TOL, "z=-gamma, gamma=tr(Sigma)/p"))

    trials = mc_trials or max(100, 50 * reps)
    g = scale * np.array(MC_GAMMA_MULTS)
    mc = mc_oracle_trials(model, n, g, trials, seed=seed)
    diff = mc.mean() - mc.semi_mean()
    for mult, d, se in zip(MC_GAMMA_MULTS, diff, mc.stderr()):
        checks.append(mk(f"mc_vs_semi_oracle_gamma_{mult:g}", abs(d) / se, MC_TOL_SE,
                         f"deviation in standard errors, trials={trials}"))

    e1, e2 = delta_consistency(model, n, scale, reps)
    checks.append(mk("delta1_hat_vs_fixed_point", e1, DE_TOL, "median relative error"))
    checks.append(mk("delta2_hat_vs_fixed_point", e2, DE_TOL, "median relative error of real parts"))

    gate = sign_gate(p, n, reps, seed)
    checks.append(mk("bracket_sign_gate", 0.0 if gate.matches_frozen else 1.0, 0.0,
                     f"chosen={gate.chosen.label} frozen={CONSISTENT_VARIANT.label}"))
    checks.append(mk("consistent_vs_semi_oracle", gate.scores[CONSISTENT_VARIANT.label], DE_TOL,
                     "median relative deviation, central two decades"))

    dev, *_ = asymptotic_vs_mc(model, n, trials, seed)
    checks.append(mk("asymptotic_vs_mc", dev, DE_TOL, "median relative deviation, central two decades"))
    return checks, gate


def suite_json(checks, gate: GateResult) -> str:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "all_passed": all(c.passed for c in checks),
        "bracket_variant": gate.chosen.label,
        "bracket_scores": {k: round(v, 12) for k, v in sorted(gate.scores.items())},
        "checks": [asdict(c) for c in checks],
    }
    return json.dumps(payload, indent=2, sort_keys=True)
