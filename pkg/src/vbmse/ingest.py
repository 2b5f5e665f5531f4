"""Reading price/return CSV files and slicing rolling windows."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from vbmse._io import atomic_writer

logger = logging.getLogger(__name__)

_MISSING = {"", "na", "nan", "null", "none"}


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class ReturnsMatrix:
    """Log returns of ``p`` assets over ``T`` trading days (assets in rows)."""

    assets: tuple[str, ...]
    dates: tuple[str, ...]
    values: np.ndarray
    dropped: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape != (len(self.assets), len(self.dates)):
            raise IngestError(
                f"values shape {values.shape} does not match "
                f"{len(self.assets)} assets x {len(self.dates)} dates"
            )
        if not np.all(np.isfinite(values)):
            raise IngestError("returns contain missing or non-finite entries")
        if len(set(self.dates)) != len(self.dates):
            raise IngestError("duplicate date labels")
        if len(self.assets) < 2:
            raise IngestError(f"need at least 2 assets, got {len(self.assets)}")
        if len(self.dates) < 2:
            raise IngestError("insufficient history: need at least 2 dates")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "ReturnsMatrix":
        return ReturnsMatrix(self.assets, self.dates, values, self.dropped)


@dataclass(frozen=True)
class WindowSlice:
    train: np.ndarray
    hold: np.ndarray
    t_index: int


def parse_returns_csv(path, mode: str = "returns") -> ReturnsMatrix:
    """Parse a ``date,<asset>,<asset>,...`` CSV into a :class:`ReturnsMatrix`.

    With ``mode="prices"`` the cells are prices and are converted to log
    returns ``log(P_t / P_{t-1})``, so one date is lost.  Assets with any
    missing cell are dropped (never imputed) and reported through the
    ``dropped`` field and a log warning.
    """
    if mode not in ("prices", "returns"):
        raise IngestError(f"unknown mode {mode!r}; expected 'prices' or 'returns'")
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if any(cell.strip() for cell in row)]
    if len(rows) < 2:
        raise IngestError("insufficient history: file has no data rows")

    header = [h.strip() for h in rows[0]]
    assets = header[1:]
    if not assets:
        raise IngestError("header has no asset columns")
    if len(set(assets)) != len(assets):
        raise IngestError("duplicate asset identifiers in header")

    dates = []
    raw = np.empty((len(assets), len(rows) - 1))
    for i, row in enumerate(rows[1:]):
        line = i + 2
        if len(row) != len(header):
            raise IngestError(
                f"row {line}: expected {len(header)} cells, found {len(row)}"
            )
        dates.append(row[0].strip())
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell.lower() in _MISSING:
                raw[j, i] = math.nan
                continue
            try:
                raw[j, i] = float(cell)
            except ValueError:
                raise IngestError(
                    f"row {line}, column {j + 2} ({assets[j]!r}): cannot parse {cell!r}"
                ) from None
            if not math.isfinite(raw[j, i]):
                raise IngestError(
                    f"row {line}, column {j + 2} ({assets[j]!r}): non-finite value {cell!r}"
                )

    keep = ~np.isnan(raw).any(axis=1)
    dropped = tuple(a for a, k in zip(assets, keep) if not k)
    if dropped:
        logger.warning("dropping %d asset(s) with missing values: %s", len(dropped), ", ".join(dropped))
    assets = [a for a, k in zip(assets, keep) if k]
    raw = raw[keep]
    if len(assets) < 2:
        raise IngestError(f"fewer than 2 assets survive ingestion ({len(assets)})")

    if mode == "prices":
        if np.any(raw <= 0):
            j, i = np.argwhere(raw <= 0)[0]
            raise IngestError(
                f"row {i + 2}, asset {assets[j]!r}: non-positive price {raw[j, i]!r}"
            )
        values = np.diff(np.log(raw), axis=1)
        dates = dates[1:]
    else:
        values = raw
    if len(dates) < 2:
        raise IngestError("insufficient history: fewer than 2 dates")
    return ReturnsMatrix(tuple(assets), tuple(dates), values, dropped)


def write_returns_csv(path, r: ReturnsMatrix) -> None:
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *r.assets])
        for t, d in enumerate(r.dates):
            w.writerow([d, *(repr(float(v)) for v in r.values[:, t])])


def rolling_windows(r, n: int, h: int) -> list[WindowSlice]:
    """Split ``r`` into train/hold pairs: train on the ``n`` days before
    ``t``, hold ``h`` days from ``t``, then shift by ``h``.

    The trailing holding block may be shorter than ``h``.  ``r`` may be a
    :class:`ReturnsMatrix` or a bare ``p x T`` array.
    """
    values = r.values if isinstance(r, ReturnsMatrix) else np.asarray(r, dtype=float)
    T = values.shape[1]
    if n < 2 or h < 1:
        raise IngestError(f"window length must be >= 2 and rebalance >= 1 (got n={n}, h={h})")
    if n >= T:
        raise IngestError(f"insufficient history: window {n} needs at least {n + 1} dates, have {T}")
    return [
        WindowSlice(values[:, t - n:t], values[:, t:min(t + h, T)], t)
        for t in range(n, T, h)
    ]
