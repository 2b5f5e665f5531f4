import csv
import json

import numpy as np
import pytest

from vbmse.cli import main
from vbmse.datagen import SyntheticModel, ar1_sigma
from vbmse.ingest import parse_returns_csv
from vbmse.moments import fit_moments
from vbmse.selector import GridConfig, make_curve, mse_semi_oracle


@pytest.fixture(scope="module")
def synth_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "r.csv"
    assert main(["synth", "--synth", "p=30,n=300,k=3", "--seed", "4", "--output", str(path)]) == 0
    return path


def _rows(path):
    return list(csv.reader(open(path)))


def test_synth_writes_matrix(synth_csv):
    r = parse_returns_csv(synth_csv)
    assert (r.p, r.T) == (30, 300)


def test_select_gamma(synth_csv, tmp_path, capsys):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["select-gamma", "--input", str(synth_csv), "--window", "60", "--output", str(out1)]) == 0
    first = capsys.readouterr().out
    assert first.startswith("gamma_opt=")
    assert main(["select-gamma", "--input", str(synth_csv), "--window", "60", "--output", str(out2)]) == 0
    assert capsys.readouterr().out == first
    assert out1.read_bytes() == out2.read_bytes()
    rows = _rows(out1)
    assert rows[0] == ["gamma", "mse_consistent", "schema_version"] and len(rows) == 201


@pytest.mark.xfail(strict=True, reason="consistent curve is biased through its cross term; see README, Validation status")
def test_select_gamma_near_semi_oracle_argmin(tmp_path, capsys):
    path = tmp_path / "r.csv"
    main(["synth", "--synth", "p=100,n=100,rho=0.6,mu=1", "--output", str(path)])
    capsys.readouterr()
    main(["select-gamma", "--input", str(path), "--output", str(tmp_path / "c.csv")])
    gamma = float(capsys.readouterr().out.strip().split("=")[1])
    r = parse_returns_csv(path)
    sm = fit_moments(r.values)
    gs = GridConfig().gammas(sm.mean_eigenvalue)
    semi = make_curve(gs, mse_semi_oracle(sm, ar1_sigma(100, 0.6), gs), "semi", 100, 100)
    assert abs(np.searchsorted(gs, gamma) - np.searchsorted(gs, semi.gamma_opt)) <= 1


def test_empty_file(tmp_path, capsys):
    path = tmp_path / "empty.csv"
    path.write_text("")
    assert main(["select-gamma", "--input", str(path), "--output", str(tmp_path / "o.csv")]) == 2
    assert "insufficient history" in capsys.readouterr().err


def test_missing_input(tmp_path, capsys):
    assert main(["select-gamma", "--output", str(tmp_path / "o.csv")]) == 2
    assert "--input" in capsys.readouterr().err


def test_bad_method(synth_csv, capsys):
    assert main(["backtest", "--input", str(synth_csv), "--window", "60", "--methods", "vb_mse,oops"]) == 2
    err = capsys.readouterr().err
    assert "oops" in err and "vb_mse, plugin, lw, scm_pinv, equal_weight" in err


@pytest.mark.parametrize("flag,value", [("--rebalance", "0"), ("--grid-points", "0"), ("--trials", "-3")])
def test_non_positive_numbers(synth_csv, flag, value):
    assert main(["backtest", "--input", str(synth_csv), "--window", "60", flag, value]) == 2


def test_grid_bounds_checked(synth_csv, tmp_path):
    args = ["select-gamma", "--input", str(synth_csv), "--output", str(tmp_path / "o.csv")]
    assert main(args + ["--grid-min-mult", "10", "--grid-max-mult", "1"]) == 2


def test_mse_curve_synthetic(tmp_path, capsys):
    out = tmp_path / "curves.csv"
    assert main(["mse-curve", "--synth", "p=40,n=40,rho=0.6,mu=1", "--trials", "100",
                 "--grid-points", "30", "--output", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["gamma", "mse_mc_oracle", "mse_semi_oracle", "mse_plugin", "mse_asymptotic",
                       "mse_consistent", "schema_version"]
    assert len(rows) == 31


def test_mse_curve_single_point_and_variants(synth_csv, tmp_path):
    out = tmp_path / "one.csv"
    assert main(["mse-curve", "--input", str(synth_csv), "--grid-points", "1", "--variants", "plugin",
                 "--output", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["gamma", "mse_plugin", "schema_version"] and len(rows) == 2


def test_mse_curve_oracle_needs_model(synth_csv, tmp_path, capsys):
    assert main(["mse-curve", "--input", str(synth_csv), "--variants", "semi_oracle",
                 "--output", str(tmp_path / "x.csv")]) == 2
    assert main(["mse-curve", "--input", str(synth_csv), "--variants", "nope",
                 "--output", str(tmp_path / "x.csv")]) == 2


def test_sweep_nine_rows(synth_csv, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--input", str(synth_csv), "--windows", "40,80,120",
                 "--methods", "vb_mse,lw,equal_weight", "--output", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 10 and rows[0][-1] == "schema_version"


def test_backtest_poison_check(synth_csv, tmp_path, capsys):
    out, ret = tmp_path / "bt.csv", tmp_path / "ret.csv"
    assert main(["backtest", "--input", str(synth_csv), "--window", "60", "--methods", "vb_mse,lw",
                 "--output", str(out), "--returns-output", str(ret), "--poison-check"]) == 0
    text = capsys.readouterr().out
    assert text.count("weights_identical=True oos_returns_differ=True") == 2
    assert len(_rows(out)) == 3
    assert len(_rows(ret)) == 1 + 2 * 240


def test_prices_mode(tmp_path):
    path = tmp_path / "p.csv"
    rng = np.random.default_rng(0)
    prices = 100 * np.exp(np.cumsum(rng.normal(0, 0.01, size=(80, 4)), axis=0))
    with open(path, "w") as fh:
        fh.write("date,A,B,C,D\n")
        for t, row in enumerate(prices):
            fh.write(f"t{t}," + ",".join(repr(float(x)) for x in row) + "\n")
    assert main(["backtest", "--input", str(path), "--mode", "prices", "--window", "30",
                 "--methods", "equal_weight"]) == 0


def test_validate_tolerance_zero_fails(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert main(["validate", "--p", "20", "--n", "20", "--reps", "2", "--tolerance", "0",
                 "--output", str(out)]) == 1
    report = json.loads(out.read_text())
    assert report["all_passed"] is False
    assert report["schema_version"] == 1


def test_validate_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["validate", "--p", "20", "--n", "20", "--reps", "2", "--seed", "3", "--output", str(a)])
    main(["validate", "--p", "20", "--n", "20", "--reps", "2", "--seed", "3", "--output", str(b)])
    assert a.read_bytes() == b.read_bytes()
    assert "bracket_variant=" in capsys.readouterr().out


def test_validate_rejects_tiny_problem(capsys):
    assert main(["validate", "--p", "5"]) == 2
