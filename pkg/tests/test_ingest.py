import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vbmse.ingest import IngestError, ReturnsMatrix, parse_returns_csv, rolling_windows, write_returns_csv


def _write(tmp_path, text, name="r.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_returns(tmp_path):
    path = _write(tmp_path, "date,A,B\n2020-01-01,0.01,-0.02\n2020-01-02,0.03,0.00\n2020-01-03,-0.01,0.02\n")
    r = parse_returns_csv(path)
    assert r.assets == ("A", "B")
    assert r.dates == ("2020-01-01", "2020-01-02", "2020-01-03")
    np.testing.assert_array_equal(r.values, [[0.01, 0.03, -0.01], [-0.02, 0.0, 0.02]])
    assert (r.p, r.T) == (2, 3)


def test_prices_become_log_returns(tmp_path):
    path = _write(tmp_path, "date,A,B\nd1,100,50\nd2,110,50\nd3,99,25\n")
    r = parse_returns_csv(path, mode="prices")
    assert r.dates == ("d2", "d3")
    np.testing.assert_allclose(r.values, [[np.log(1.1), np.log(0.9)], [0.0, np.log(0.5)]], rtol=1e-13)


def test_non_positive_price(tmp_path):
    path = _write(tmp_path, "date,A,B\nd1,100,50\nd2,0,50\nd3,99,25\n")
    with pytest.raises(IngestError, match="non-positive price"):
        parse_returns_csv(path, mode="prices")


def test_missing_cells_drop_asset(tmp_path, caplog):
    path = _write(tmp_path, "date,A,B,C\nd1,0.1,,0.2\nd2,0.2,0.1,NA\nd3,0.3,0.2,0.1\nd4,0.1,0.1,0.1\n")
    path2 = _write(tmp_path, "date,A,B,C,D\nd1,0.1,,0.2,1\nd2,0.2,0.1,0.3,2\nd3,0.3,0.2,0.1,3\n", "r2.csv")
    with caplog.at_level(logging.WARNING, logger="vbmse.ingest"):
        r = parse_returns_csv(path2)
    assert r.assets == ("A", "C", "D")
    assert r.dropped == ("B",)
    assert "B" in caplog.text
    with pytest.raises(IngestError, match="fewer than 2 assets"):
        parse_returns_csv(path)


def test_unparseable_cell_reports_location(tmp_path):
    path = _write(tmp_path, "date,A,B\nd1,0.1,0.2\nd2,abc,0.1\n")
    with pytest.raises(IngestError, match=r"row 3, column 2 \('A'\)"):
        parse_returns_csv(path)


@pytest.mark.parametrize("text", ["", "date,A,B\n", "\n\n"])
def test_empty_file(tmp_path, text):
    with pytest.raises(IngestError, match="insufficient history"):
        parse_returns_csv(_write(tmp_path, text))


def test_single_row_is_insufficient(tmp_path):
    with pytest.raises(IngestError, match="insufficient history"):
        parse_returns_csv(_write(tmp_path, "date,A,B\nd1,0.1,0.2\n"))


def test_ragged_row(tmp_path):
    with pytest.raises(IngestError, match="row 3: expected 3 cells"):
        parse_returns_csv(_write(tmp_path, "date,A,B\nd1,0.1,0.2\nd2,0.1\n"))


def test_duplicate_dates_and_assets(tmp_path):
    with pytest.raises(IngestError, match="duplicate date"):
        parse_returns_csv(_write(tmp_path, "date,A,B\nd1,0.1,0.2\nd1,0.1,0.3\n"))
    with pytest.raises(IngestError, match="duplicate asset"):
        parse_returns_csv(_write(tmp_path, "date,A,A\nd1,0.1,0.2\nd2,0.1,0.3\n"))


def test_bad_mode(tmp_path):
    with pytest.raises(IngestError, match="unknown mode"):
        parse_returns_csv(_write(tmp_path, "date,A,B\nd1,1,2\nd2,1,2\n"), mode="levels")


def test_matrix_is_read_only():
    r = ReturnsMatrix(("a", "b"), ("x", "y"), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        r.values[0, 0] = 1.0


def test_matrix_rejects_non_finite():
    with pytest.raises(IngestError, match="non-finite"):
        ReturnsMatrix(("a", "b"), ("x", "y"), np.array([[0.0, np.nan], [0.0, 0.0]]))


def test_write_read_round_trip(tmp_path, rng):
    r = ReturnsMatrix(("a", "b", "c"), tuple(f"t{i}" for i in range(7)), rng.normal(size=(3, 7)))
    write_returns_csv(tmp_path / "out.csv", r)
    back = parse_returns_csv(tmp_path / "out.csv")
    assert back.assets == r.assets and back.dates == r.dates
    np.testing.assert_array_equal(back.values, r.values)


def test_window_hand_count():
    slices = rolling_windows(np.zeros((3, 500)), 60, 20)
    assert len(slices) == 22
    assert sum(s.hold.shape[1] for s in slices) == 440
    assert slices[0].t_index == 60 and slices[-1].t_index == 480


def test_short_trailing_block():
    slices = rolling_windows(np.zeros((2, 61)), 50, 20)
    assert [s.hold.shape[1] for s in slices] == [11]


@pytest.mark.parametrize("n,h", [(1, 5), (5, 0)])
def test_window_arguments(n, h):
    with pytest.raises(IngestError):
        rolling_windows(np.zeros((2, 30)), n, h)


def test_window_longer_than_history():
    with pytest.raises(IngestError, match="insufficient history"):
        rolling_windows(np.zeros((2, 30)), 30, 5)


@given(T=st.integers(3, 300), n=st.integers(2, 200), h=st.integers(1, 50))
def test_windows_tile_history(T, n, h):
    if n >= T:
        with pytest.raises(IngestError):
            rolling_windows(np.zeros((2, T)), n, h)
        return
    values = np.tile(np.arange(T, dtype=float), (2, 1))
    slices = rolling_windows(values, n, h)
    assert len(slices) == -(-(T - n) // h)
    held = np.concatenate([s.hold[0] for s in slices])
    np.testing.assert_array_equal(held, np.arange(n, T))
    for s in slices:
        assert s.train.shape[1] == n
        assert s.train[0, -1] == s.t_index - 1 < s.hold[0, 0]


@pytest.mark.parametrize("T,holds", [(100, [(60, 79), (80, 99)]), (105, [(60, 79), (80, 99), (100, 104)]),
                                     (61, [(60, 60)])])
def test_window_examples(T, holds):
    values = np.tile(np.arange(T, dtype=float), (2, 1))
    slices = rolling_windows(values, 60, 20)
    assert [(s.hold[0, 0], s.hold[0, -1]) for s in slices] == holds
    assert slices[0].train[0, 0] == 0 and slices[0].train[0, -1] == 59


@given(st.lists(st.floats(-0.2, 0.2), min_size=2, max_size=60))
def test_prices_round_trip(tmp_path_factory, steps):
    prices = 50.0 * np.exp(np.concatenate([[0.0], np.cumsum(steps)]))
    path = tmp_path_factory.mktemp("p") / "p.csv"
    lines = ["date,A,B"] + [f"t{i},{float(p)!r},{float(2 * p)!r}" for i, p in enumerate(prices)]
    path.write_text("\n".join(lines) + "\n")
    r = parse_returns_csv(path, mode="prices")
    ratio = np.exp(np.cumsum(r.values[0]))
    np.testing.assert_allclose(ratio, prices[1:] / prices[0], rtol=1e-12)
