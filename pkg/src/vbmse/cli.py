"""Batch command-line front end.

Exit codes: 0 success, 1 validation failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from vbmse._io import atomic_writer
from vbmse.backtest import METHODS, BacktestError, MethodConfig, run_backtest, sweep_windows
from vbmse.backtest import write_report_csv, write_returns_csv
from vbmse.datagen import SyntheticModel, ar1_sigma, factor_sigma, generate, parse_synth_spec
from vbmse.ingest import IngestError, ReturnsMatrix, parse_returns_csv, rolling_windows, write_returns_csv as write_matrix
from vbmse.moments import MomentsError, fit_moments
from vbmse.selector import (
    VARIANT_NAMES,
    GridConfig,
    SelectorError,
    consistent_curve_values,
    make_curve,
    mc_oracle_trials,
    mse_asymptotic,
    mse_plugin,
    mse_semi_oracle,
    select_gamma,
    write_curves_csv,
)

CLI_METHODS = tuple(m for m in METHODS if m != "true_gmvp")
COMMANDS = ("select-gamma", "mse-curve", "backtest", "sweep", "synth", "validate")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str | None = None
    output: str | None = None
    mode: str = "returns"
    n_window: int | None = None
    rebalance: int = 20
    grid: GridConfig = GridConfig()
    methods: tuple = ("vb_mse",)
    windows: tuple = ()
    seed: int = 0
    trials: int = 200
    synth: dict | None = None
    variants: tuple = ()
    returns_output: str | None = None
    poison_check: bool = False

    def __post_init__(self):
        for name in ("rebalance", "trials"):
            if getattr(self, name) <= 0:
                raise UsageError(f"--{name} must be positive")
        if self.n_window is not None and self.n_window <= 0:
            raise UsageError("--window must be positive")
        if self.seed < 0:
            raise UsageError("--seed must be non-negative")
        if any(w <= 0 for w in self.windows):
            raise UsageError("--windows must be positive")
        bad = [m for m in self.methods if m not in CLI_METHODS]
        if bad:
            raise UsageError(f"unknown method(s) {', '.join(bad)}; valid methods: {', '.join(CLI_METHODS)}")


def _csv_list(text, cast=str):
    return tuple(cast(x.strip()) for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="CSV with a date column then one column per asset")
    common.add_argument("--output", help="output path")
    common.add_argument("--mode", choices=("returns", "prices"), default="returns")
    common.add_argument("--window", type=int, help="training window length n")
    common.add_argument("--rebalance", type=int, default=20)
    common.add_argument("--grid-min-mult", type=float, default=1e-4)
    common.add_argument("--grid-max-mult", type=float, default=1e3)
    common.add_argument("--grid-points", type=int, default=200)
    common.add_argument("--methods", default="vb_mse", help=f"comma list of {', '.join(CLI_METHODS)}")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=200)
    common.add_argument("--synth", help="synthetic model, e.g. p=300,n=300,rho=0.6,mu=1")

    parser = argparse.ArgumentParser(prog="vbmse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("select-gamma", parents=[common], help="print gamma_opt and write the consistent-MSE curve")
    p = sub.add_parser("mse-curve", parents=[common], help="write all MSE curves on the gamma grid")
    p.add_argument("--variants", help=f"comma list of {', '.join(VARIANT_NAMES)}")
    p = sub.add_parser("backtest", parents=[common], help="rolling-window backtest at one window length")
    p.add_argument("--returns-output", help="also dump per-day out-of-sample returns here")
    p.add_argument("--poison-check", action="store_true",
                   help="perturb the final holding block and confirm its weights do not change")
    p = sub.add_parser("sweep", parents=[common], help="backtest over several window lengths")
    p.add_argument("--windows", required=True, help="comma list of training window lengths")
    p.add_argument("--returns-output")
    sub.add_parser("synth", parents=[common], help="write a synthetic returns CSV")
    p = sub.add_parser("validate", parents=[common], help="run the numerical validation suite")
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--tolerance", type=float, help="override every check tolerance")
    return parser


def config_from_args(args) -> RunConfig:
    try:
        grid = GridConfig(args.grid_min_mult, args.grid_max_mult, args.grid_points)
        synth = parse_synth_spec(args.synth) if args.synth else None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    variants = _csv_list(args.variants) if getattr(args, "variants", None) else ()
    bad = [v for v in variants if v not in VARIANT_NAMES]
    if bad:
        raise UsageError(f"unknown variant(s) {', '.join(bad)}; valid: {', '.join(VARIANT_NAMES)}")
    windows = _csv_list(args.windows, int) if getattr(args, "windows", None) else ()
    return RunConfig(
        command=args.command, input=args.input, output=args.output, mode=args.mode,
        n_window=args.window, rebalance=args.rebalance, grid=grid,
        methods=_csv_list(args.methods), windows=windows, seed=args.seed,
        trials=args.trials, synth=synth, variants=variants,
        returns_output=getattr(args, "returns_output", None),
        poison_check=getattr(args, "poison_check", False),
    )


def _require(value, flag):
    if value is None:
        raise UsageError(f"{flag} is required for this command")
    return value


def _load(cfg: RunConfig) -> ReturnsMatrix:
    return parse_returns_csv(_require(cfg.input, "--input"), cfg.mode)


def _last_window(r: ReturnsMatrix, n):
    if n is None:
        return r.values
    if n < 2 or n > r.T:
        raise IngestError(f"insufficient history: window {n} with {r.T} dates")
    return r.values[:, -n:]


def cmd_select_gamma(cfg: RunConfig) -> int:
    out = _require(cfg.output, "--output")
    sm = fit_moments(_last_window(_load(cfg), cfg.n_window))
    curve = select_gamma(sm, cfg.grid)
    write_curves_csv(out, curve.gammas, {"consistent": curve.values})
    print(f"gamma_opt={curve.gamma_opt!r}")
    return 0


def _synth_model(spec: dict, seed: int) -> SyntheticModel:
    p = spec.get("p")
    if p is None:
        raise UsageError("--synth needs p=")
    if "k" in spec:
        sigma = factor_sigma(p, spec["k"], seed=seed)
    else:
        sigma = ar1_sigma(p, spec.get("rho", 0.6))
    return SyntheticModel(sigma, np.full(p, spec.get("mu", 0.0)), seed=seed)


def cmd_mse_curve(cfg: RunConfig) -> int:
    out = _require(cfg.output, "--output")
    if cfg.synth is not None:
        model = _synth_model(cfg.synth, cfg.seed)
        n = cfg.synth.get("n") or _require(cfg.n_window, "n= in --synth or --window")
        train, _ = generate(model, n, trial=0)
        variants = cfg.variants or VARIANT_NAMES
    else:
        model = None
        train = _last_window(_load(cfg), cfg.n_window)
        variants = cfg.variants or ("consistent", "plugin")
        oracle = [v for v in variants if v not in ("consistent", "plugin")]
        if oracle:
            raise UsageError(f"variant(s) {', '.join(oracle)} need a known model (--synth)")
    sm = fit_moments(train)
    gammas = cfg.grid.gammas(sm.mean_eigenvalue)
    cols = {}
    for v in VARIANT_NAMES:
        if v not in variants:
            continue
        if v == "consistent":
            cols[v] = consistent_curve_values(sm, gammas)
        elif v == "plugin":
            cols[v] = mse_plugin(sm, gammas)
        elif v == "semi_oracle":
            cols[v] = mse_semi_oracle(sm, model.sigma, gammas, model.sigma_sqrt)
        elif v == "asymptotic":
            cols[v] = mse_asymptotic(model.sigma, sm.n, gammas)
        elif v == "mc_oracle":
            cols[v] = mc_oracle_trials(model, sm.n, gammas, cfg.trials, seed=cfg.seed + 1,
                                       with_semi=False).mean()
    write_curves_csv(out, gammas, cols)
    for v, vals in cols.items():
        print(f"{v}_gamma_opt={make_curve(gammas, vals, v, sm.n, sm.p).gamma_opt!r}")
    return 0


def _poison_check(r: ReturnsMatrix, cfg: RunConfig, method: str) -> bool:
    """Scramble the final holding block; no weight may change, its returns must."""
    last = rolling_windows(r, cfg.n_window, cfg.rebalance)[-1]
    poisoned = r.values.copy()
    rng = np.random.default_rng(cfg.seed)
    poisoned[:, last.t_index:] += rng.normal(scale=10.0, size=poisoned[:, last.t_index:].shape)
    rp = r.with_values(poisoned)
    mc = MethodConfig(grid=cfg.grid)
    base = run_backtest(r, cfg.n_window, cfg.rebalance, method, mc)
    pois = run_backtest(rp, cfg.n_window, cfg.rebalance, method, mc)
    same = all(np.array_equal(a, b) for a, b in zip(base.weights, pois.weights))
    differs = not np.array_equal(base.oos_returns[-1:], pois.oos_returns[-1:])
    print(f"poison_check method={method} weights_identical={same} oos_returns_differ={differs}")
    return same and differs


def cmd_backtest(cfg: RunConfig) -> int:
    r = _load(cfg)
    n = _require(cfg.n_window, "--window")
    reports = [run_backtest(r, n, cfg.rebalance, m, MethodConfig(grid=cfg.grid)) for m in cfg.methods]
    _emit_reports(cfg, reports)
    if cfg.poison_check:
        ok = all(_poison_check(r, cfg, m) for m in cfg.methods)
        return 0 if ok else 1
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    r = _load(cfg)
    reports = sweep_windows(r, cfg.windows, cfg.methods, cfg.rebalance, MethodConfig(grid=cfg.grid))
    _emit_reports(cfg, reports)
    return 0


def _emit_reports(cfg: RunConfig, reports):
    if cfg.output:
        write_report_csv(cfg.output, reports)
    if cfg.returns_output:
        write_returns_csv(cfg.returns_output, reports)
    for rep in reports:
        print(f"method={rep.method} n_window={rep.n_window} rebalances={rep.num_rebalances} "
              f"realized_risk_annualized={rep.realized_risk_annualized:.6g}")


def cmd_synth(cfg: RunConfig) -> int:
    spec = _require(cfg.synth, "--synth")
    out = _require(cfg.output, "--output")
    T = spec.get("T") or spec.get("n")
    if not T:
        raise UsageError("--synth needs n= (number of days)")
    model = _synth_model(spec, cfg.seed)
    Y, _ = generate(model, int(T))
    assets = tuple(f"A{i:03d}" for i in range(model.p))
    dates = tuple(f"d{t:05d}" for t in range(int(T)))
    write_matrix(out, ReturnsMatrix(assets, dates, Y))
    print(f"wrote {model.p} assets x {T} days to {out}")
    return 0


def cmd_validate(cfg: RunConfig, p: int, n: int, reps: int, tolerance) -> int:
    from vbmse.validation import run_suite, suite_json

    checks, gate = run_suite(p, n, reps, cfg.seed, tolerance=tolerance)
    width = max(len(c.name) for c in checks)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status}  {c.name:<{width}}  deviation={c.deviation:.4g}  tolerance={c.tolerance:g}")
    print(f"bracket_variant={gate.chosen.label}")
    text = suite_json(checks, gate)
    if cfg.output:
        with atomic_writer(cfg.output) as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0 if all(c.passed for c in checks) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        if cfg.command == "select-gamma":
            return cmd_select_gamma(cfg)
        if cfg.command == "mse-curve":
            return cmd_mse_curve(cfg)
        if cfg.command == "backtest":
            return cmd_backtest(cfg)
        if cfg.command == "sweep":
            return cmd_sweep(cfg)
        if cfg.command == "synth":
            return cmd_synth(cfg)
        if cfg.command == "validate":
            if min(args.p, args.n) < 20 or args.reps < 1:
                raise UsageError("validate needs --p, --n >= 20 and --reps >= 1")
            return cmd_validate(cfg, args.p, args.n, args.reps, args.tolerance)
    except (UsageError, IngestError, MomentsError, SelectorError, BacktestError, ValueError) as exc:
        print(f"vbmse: error: {exc}", file=sys.stderr)
        return 2
    parser.error(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
