"""Validation-based MSE selection of the ridge penalty for sample-covariance estimators."""

from vbmse.backtest import METHODS, BacktestReport, MethodConfig, fit_weights, run_backtest, sweep_windows
from vbmse.datagen import SyntheticModel, ar1_sigma, factor_sigma, generate
from vbmse.ingest import IngestError, ReturnsMatrix, parse_returns_csv, rolling_windows
from vbmse.moments import SpectralMoments, TraceFunctionals, fit_moments, trace_functionals
from vbmse.portfolio import PortfolioWeights, equal_weights, gmvp_weights, gmvp_weights_true, lw_weights, pinv_weights
from vbmse.rmt import FixedPointSolution, consistent_deltas, solve_delta1, solve_delta2, solve_resolvent
from vbmse.selector import (
    BRACKET_VARIANTS,
    CONSISTENT_VARIANT,
    GridConfig,
    MseCurve,
    mse_asymptotic,
    mse_consistent,
    mse_mc_oracle,
    mse_plugin,
    mse_semi_oracle,
    select_gamma,
)

__version__ = "0.1.0"
