"""Daily return CSV ingestion and annualized moment estimation."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicateAssetError,
    EmptySeriesError,
    FormatError,
    InsufficientDataError,
    ModelError,
)

CASH = "CASH"
TRADING_DAYS = 252


@dataclass(frozen=True)
class ReturnSeries:
    dates: tuple[str, ...]
    assets: tuple[str, ...]
    values: np.ndarray  # T x m daily simple returns

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise FormatError("return matrix must be two-dimensional")
        if values.shape[0] != len(self.dates):
            raise FormatError("row count does not match date count")
        if values.shape[1] != len(self.assets):
            raise FormatError("column count does not match asset count")
        if not np.all(np.isfinite(values)):
            raise FormatError("missing or non-finite return value")
        values.setflags(write=False)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "values", values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["date", *self.assets])
        for d, row in zip(self.dates, self.values):
            writer.writerow([d, *(f"{v:.15g}" for v in row)])
        return buf.getvalue()


@dataclass(frozen=True)
class AssetUniverse:
    names: tuple[str, ...]
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64).reshape(-1)
        sigma = np.array(self.sigma, dtype=np.float64)
        m = len(self.names)
        if mu.shape != (m,) or sigma.shape != (m, m):
            raise ModelError(f"inconsistent dimensions: {m} names, mu {mu.shape}, sigma {sigma.shape}")
        if m and not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-12):
            raise ModelError("covariance matrix is not symmetric")
        if m and np.linalg.eigvalsh(sigma).min() < -1e-9:
            raise ModelError("covariance matrix is not positive semidefinite")
        if len(set(self.names)) != m:
            raise DuplicateAssetError("asset names must be unique")
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def has_cash(self) -> bool:
        return CASH in self.names


def parse_return_csv(text: str) -> ReturnSeries:
    """Parse a ``date,<asset>,...`` CSV of daily simple returns.

    LF and CRLF line endings are both accepted.  Errors carry 1-based row and
    column positions.
    """
    if text.startswith("﻿"):
        text = text[1:]
    rows = [row for row in csv.reader(io.StringIO(text, newline="")) if row]
    if not rows:
        raise EmptySeriesError("empty document")
    header = [cell.strip() for cell in rows[0]]
    if header[0].lower() != "date":
        raise FormatError("first header cell must be 'date'", row=1, column=1)
    assets = header[1:]
    seen = set()
    for j, name in enumerate(assets, start=2):
        if not name:
            raise FormatError("empty asset name", row=1, column=j)
        if name in seen:
            raise FormatError(f"duplicate asset name {name!r}", row=1, column=j)
        seen.add(name)
    body = rows[1:]
    if not body:
        raise EmptySeriesError("no data rows")
    dates = []
    values = np.empty((len(body), len(assets)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise FormatError(f"expected {len(header)} cells, found {len(row)}", row=i)
        dates.append(row[0].strip())
        for j, cell in enumerate(row[1:], start=2):
            try:
                values[i - 2, j - 2] = float(cell)
            except ValueError:
                raise FormatError(f"non-numeric cell {cell!r}", row=i, column=j) from None
            if not np.isfinite(values[i - 2, j - 2]):
                raise FormatError(f"non-finite cell {cell!r}", row=i, column=j)
    return ReturnSeries(tuple(dates), tuple(assets), values)


def read_return_csv(path) -> ReturnSeries:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_return_csv(fh.read())


def estimate_universe(series: ReturnSeries, annualization: int = TRADING_DAYS) -> AssetUniverse:
    """Annualized sample mean and covariance (``T - 1`` denominator)."""
    if int(annualization) != annualization or annualization <= 0:
        raise ValueError("annualization must be a positive integer")
    x = series.values
    if x.shape[0] < 2:
        raise InsufficientDataError(f"need at least 2 rows, got {x.shape[0]}")
    mu = annualization * x.mean(axis=0)
    sigma = annualization * np.cov(x, rowvar=False, ddof=1).reshape(x.shape[1], x.shape[1])
    sigma = 0.5 * (sigma + sigma.T)
    # constant columns would otherwise carry ~1e-36 of mean round-off
    flat = np.ptp(x, axis=0) == 0.0
    sigma[flat, :] = 0.0
    sigma[:, flat] = 0.0
    return AssetUniverse(series.assets, mu, sigma)


def add_cash_asset(universe: AssetUniverse) -> AssetUniverse:
    if CASH in universe.names:
        raise DuplicateAssetError(f"universe already contains {CASH!r}")
    m = universe.size
    mu = np.zeros(m + 1)
    mu[:m] = universe.mu
    sigma = np.zeros((m + 1, m + 1))
    sigma[:m, :m] = universe.sigma
    return AssetUniverse((*universe.names, CASH), mu, sigma)


def synthetic_universe(n_assets=10, seed=0, mean_return=0.13, cash=True) -> AssetUniverse:
    """Random one-factor equity universe with annualized moments.

    Stand-in for a proprietary price history: expected returns scatter around
    ``mean_return`` and volatilities fall in the 20-50% band typical of single
    stocks.
    """
    rng = np.random.default_rng(seed)
    vol = rng.uniform(0.2, 0.5, n_assets)
    beta = rng.uniform(0.3, 0.8, n_assets)
    corr = np.outer(beta, beta)
    np.fill_diagonal(corr, 1.0)
    sigma = corr * np.outer(vol, vol)
    mu = mean_return + 0.3 * (vol - vol.mean()) + rng.normal(0.0, 0.04, n_assets)
    names = tuple(f"A{j + 1:02d}" for j in range(n_assets))
    uni = AssetUniverse(names, mu, sigma)
    return add_cash_asset(uni) if cash else uni
