"""Out-of-sample rolling-window backtest of GMVP weight constructors.

At each rebalance day ``t`` weights are fitted on the previous ``n`` days,
held fixed (no drift renormalisation) for the next ``rebalance`` days, and
the window moves forward by ``rebalance``.  Realized risk is the sample
standard deviation (ddof=1) of the daily out-of-sample portfolio returns.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from vbmse._io import SCHEMA_VERSION, atomic_writer
from vbmse.ingest import ReturnsMatrix, rolling_windows
from vbmse.moments import fit_moments
from vbmse.portfolio import (
    PortfolioWeights,
    equal_weights,
    gmvp_weights,
    gmvp_weights_true,
    lw_weights,
    pinv_weights,
)
from vbmse.selector import CONSISTENT_VARIANT, BracketVariant, GridConfig, make_curve, mse_plugin, select_gamma

METHODS = ("vb_mse", "plugin", "lw", "scm_pinv", "equal_weight", "true_gmvp")
TRADING_DAYS = 250
SUM_TOL = 1e-12


class BacktestError(RuntimeError):
    pass


@dataclass(frozen=True)
class MethodConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    variant: BracketVariant = CONSISTENT_VARIANT
    sigma: np.ndarray | None = None  # true covariance, only for "true_gmvp"
    annualization: int = TRADING_DAYS


@dataclass(frozen=True)
class BacktestReport:
    method: str
    n_window: int
    rebalance: int
    oos_returns: np.ndarray
    realized_risk_daily: float
    realized_risk_annualized: float
    gammas: list
    weights: list
    t_indices: list
    dates: tuple = ()

    @property
    def num_rebalances(self) -> int:
        return len(self.t_indices)


def fit_weights(train: np.ndarray, method: str, config: MethodConfig | None = None) -> PortfolioWeights:
    """Weights for one training window (``p x n``)."""
    config = config or MethodConfig()
    p = train.shape[0]
    if method == "equal_weight":
        return equal_weights(p)
    if method == "lw":
        return lw_weights(train)
    if method == "true_gmvp":
        if config.sigma is None:
            raise BacktestError("true_gmvp needs the true covariance (MethodConfig.sigma)")
        return gmvp_weights_true(config.sigma)
    sm = fit_moments(train)
    if method == "scm_pinv":
        return pinv_weights(sm)
    if method == "vb_mse":
        curve = select_gamma(sm, config.grid, variant=config.variant)
        return gmvp_weights(sm, curve.gamma_opt, method="vb_mse")
    if method == "plugin":
        gammas = config.grid.gammas(sm.mean_eigenvalue)
        curve = make_curve(gammas, mse_plugin(sm, gammas), "plugin", sm.n, sm.p)
        return gmvp_weights(sm, curve.gamma_opt, method="plugin")
    raise BacktestError(f"unknown method {method!r}; valid methods: {', '.join(METHODS)}")


def run_backtest(r, n_window: int, rebalance: int = 20, method: str = "vb_mse",
                 method_config: MethodConfig | None = None) -> BacktestReport:
    if method not in METHODS:
        raise BacktestError(f"unknown method {method!r}; valid methods: {', '.join(METHODS)}")
    config = method_config or MethodConfig()
    values = r.values if isinstance(r, ReturnsMatrix) else np.asarray(r, dtype=float)
    slices = rolling_windows(values, n_window, rebalance)

    oos, gammas, weights, t_idx = [], [], [], []
    for sl in slices:
        try:
            pw = fit_weights(sl.train, method, config)
        except Exception as exc:
            raise BacktestError(
                f"{method} failed in window t={sl.t_index} "
                f"(train columns {sl.t_index - n_window}..{sl.t_index - 1}): {exc}"
            ) from exc
        w = pw.weights
        if abs(w.sum() - 1) > SUM_TOL:
            raise BacktestError(f"{method} weights sum to {w.sum()!r} in window t={sl.t_index}")
        oos.append(w @ sl.hold)
        gammas.append(pw.gamma_used)
        weights.append(w)
        t_idx.append(sl.t_index)

    oos = np.concatenate(oos)
    daily = float(np.std(oos, ddof=1)) if oos.size > 1 else 0.0
    dates = r.dates[n_window:] if isinstance(r, ReturnsMatrix) else ()
    return BacktestReport(method, n_window, rebalance, oos, daily,
                          float(daily * np.sqrt(config.annualization)), gammas, weights, t_idx, dates)


def sweep_windows(r, n_list, methods, rebalance: int = 20,
                  method_config: MethodConfig | None = None) -> list[BacktestReport]:
    """Backtest every (method, window length) pair, methods outermost."""
    return [run_backtest(r, n, rebalance, m, method_config) for m in methods for n in n_list]


REPORT_COLUMNS = ("method", "n_window", "rebalance", "realized_risk_daily",
                  "realized_risk_annualized", "num_rebalances", "schema_version")


def write_report_csv(path, reports) -> None:
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for rep in reports:
            w.writerow([rep.method, rep.n_window, rep.rebalance, repr(float(rep.realized_risk_daily)),
                        repr(float(rep.realized_risk_annualized)), rep.num_rebalances, SCHEMA_VERSION])


def write_returns_csv(path, reports) -> None:
    """Long-format per-day out-of-sample returns."""
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "n_window", "day", "date", "portfolio_return", "schema_version"])
        for rep in reports:
            for k, ret in enumerate(rep.oos_returns):
                date = rep.dates[k] if rep.dates else ""
                w.writerow([rep.method, rep.n_window, rep.n_window + k, date, repr(float(ret)), SCHEMA_VERSION])
