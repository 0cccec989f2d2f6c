"""Price series ingestion, return panels, and compound-return blocks.

The data model is deliberately small: a ``PriceSeries`` per tradable symbol,
a ``ReturnPanel`` of aligned simple per-period returns (one column per
asset, optionally including a constant riskless column), and a
``CompoundPanel`` of n-period compound returns with proportional
transaction costs already subtracted. Everything downstream (objectives,
solvers, backtests) consumes the ``CompoundPanel``.
"""

from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    ConfigError,
    CostLengthMismatch,
    DataError,
    DuplicateSymbol,
    MalformedRow,
    NoCommonTimestamps,
    NonPositivePrice,
    PeriodExceedsData,
    SeriesTooShort,
)
from .validation import as_float_vector, check_returns_matrix, readonly

BLOCK_MODES = ("nonoverlap", "overlap", "direct")


@dataclass(frozen=True)
class PriceSeries:
    """A single symbol's price history.

    Timestamps must be strictly increasing and mutually comparable
    (all integers or all datetimes); prices must be strictly positive.
    """

    symbol: str
    timestamps: tuple
    prices: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 1:
            raise DataError(f"prices for {self.symbol!r} must be one-dimensional")
        if len(self.timestamps) != prices.shape[0]:
            raise DataError(
                f"series {self.symbol!r}: {len(self.timestamps)} timestamps "
                f"vs {prices.shape[0]} prices"
            )
        if not np.all(np.isfinite(prices)):
            raise DataError(f"series {self.symbol!r} contains non-finite prices")
        if np.any(prices <= 0.0):
            raise NonPositivePrice(f"series {self.symbol!r} contains a non-positive price")
        ts = self.timestamps
        for k in range(1, len(ts)):
            if not ts[k - 1] < ts[k]:
                raise DataError(
                    f"series {self.symbol!r}: timestamps must be strictly increasing "
                    f"(position {k})"
                )
        object.__setattr__(self, "timestamps", tuple(ts))
        object.__setattr__(self, "prices", readonly(prices))

    def __len__(self) -> int:
        return len(self.timestamps)


def to_returns(series: PriceSeries) -> np.ndarray:
    """Simple per-period returns p(t+1)/p(t) - 1 for one series."""
    if len(series) < 2:
        raise SeriesTooShort(
            f"series {series.symbol!r} has {len(series)} observation(s), need at least 2"
        )
    p = series.prices
    return p[1:] / p[:-1] - 1.0


@dataclass(frozen=True)
class ReturnPanel:
    """Aligned per-period simple returns, one column per asset.

    ``riskless_index`` marks an optional constant column holding the
    per-period riskless rate (non-negative).
    """

    assets: tuple
    samples: np.ndarray
    riskless_index: int | None = None

    def __post_init__(self):
        samples = check_returns_matrix(self.samples, "panel returns")
        assets = tuple(str(a) for a in self.assets)
        if len(assets) < 2:
            raise DataError("a return panel needs at least two assets")
        if len(set(assets)) != len(assets):
            raise DuplicateSymbol("panel asset names must be unique")
        if samples.shape[1] != len(assets):
            raise DataError(
                f"panel has {samples.shape[1]} columns but {len(assets)} asset names"
            )
        ri = self.riskless_index
        if ri is not None:
            if not 0 <= ri < len(assets):
                raise DataError(f"riskless_index {ri} out of range for {len(assets)} assets")
            col = samples[:, ri]
            if col.max() != col.min():
                raise DataError("riskless column must be constant")
            if col[0] < 0.0:
                raise DataError("riskless rate must be non-negative")
        object.__setattr__(self, "assets", assets)
        object.__setattr__(self, "samples", readonly(samples))

    @property
    def n_periods(self) -> int:
        return self.samples.shape[0]

    @property
    def n_assets(self) -> int:
        return self.samples.shape[1]

    @property
    def riskless_rate(self) -> float | None:
        if self.riskless_index is None:
            return None
        return float(self.samples[0, self.riskless_index])

    def window(self, start: int, stop: int) -> "ReturnPanel":
        """Panel restricted to periods [start, stop)."""
        return ReturnPanel(self.assets, self.samples[start:stop], self.riskless_index)


def assemble_panel(
    series,
    rf: float = 0.0,
    include_riskless: bool = False,
    riskless_symbol: str = "CASH",
) -> ReturnPanel:
    """Align price series on their common timestamps and build a return panel.

    The join is an intersection: only timestamps present in every series
    survive. At least two common timestamps are required. When
    ``include_riskless`` is set, a constant column with per-period rate
    ``rf`` is appended under ``riskless_symbol``.
    """
    series = list(series)
    if not series:
        raise DataError("no price series given")
    symbols = [s.symbol for s in series]
    if len(set(symbols)) != len(symbols):
        dupes = sorted({s for s in symbols if symbols.count(s) > 1})
        raise DuplicateSymbol(f"duplicate symbol(s): {', '.join(dupes)}")
    if include_riskless and riskless_symbol in symbols:
        raise DuplicateSymbol(f"riskless symbol {riskless_symbol!r} collides with an input series")

    common = set(series[0].timestamps)
    for s in series[1:]:
        common &= set(s.timestamps)
    if len(common) < 2:
        raise NoCommonTimestamps(
            f"series share {len(common)} timestamp(s), need at least 2"
        )
    try:
        grid = sorted(common)
    except TypeError as exc:
        raise DataError(f"timestamps are not mutually comparable: {exc}") from None

    columns = []
    for s in series:
        lookup = dict(zip(s.timestamps, s.prices))
        aligned = PriceSeries(s.symbol, tuple(grid), np.array([lookup[t] for t in grid]))
        columns.append(to_returns(aligned))
    X = np.column_stack(columns)

    riskless_index = None
    if include_riskless:
        if rf < 0.0:
            raise DataError("riskless rate must be non-negative")
        X = np.column_stack([X, np.full(X.shape[0], float(rf))])
        symbols = symbols + [riskless_symbol]
        riskless_index = len(symbols) - 1
    return ReturnPanel(tuple(symbols), X, riskless_index)


@dataclass(frozen=True)
class CostVector:
    """Proportional transaction cost per asset, charged at every rebalance.

    Costs are fractions of the allocated amount, with 0 <= c_i <= c_max < 1.
    """

    costs: np.ndarray
    c_max: float = 0.99

    def __post_init__(self):
        costs = as_float_vector(self.costs, "costs")
        if not 0.0 < self.c_max < 1.0:
            raise DataError(f"c_max must lie in (0, 1), got {self.c_max}")
        if np.any(costs < 0.0) or np.any(costs > self.c_max):
            raise DataError(f"costs must lie in [0, {self.c_max}]")
        object.__setattr__(self, "costs", readonly(costs))

    def __len__(self) -> int:
        return self.costs.shape[0]

    @classmethod
    def zero(cls, m: int) -> "CostVector":
        return cls(np.zeros(m))

    @classmethod
    def uniform(cls, c: float, m: int) -> "CostVector":
        return cls(np.full(m, float(c)))

    @classmethod
    def from_spec(cls, text: str, assets) -> "CostVector":
        """Parse either a single global fraction or ``SYM=frac,SYM=frac,...``.

        Assets not named in the per-symbol form get zero cost.
        """
        assets = list(assets)
        text = text.strip()
        if "=" not in text:
            try:
                c = float(text)
            except ValueError:
                raise MalformedRow(f"cannot parse cost spec {text!r}") from None
            return cls.uniform(c, len(assets))
        costs = np.zeros(len(assets))
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            sym, _, frac = item.partition("=")
            sym = sym.strip()
            if sym not in assets:
                raise MalformedRow(f"cost spec names unknown asset {sym!r}")
            try:
                costs[assets.index(sym)] = float(frac)
            except ValueError:
                raise MalformedRow(f"cannot parse cost fraction {frac!r} for {sym!r}") from None
        return cls(costs)


def as_cost_array(costs, m: int) -> np.ndarray:
    """Coerce a CostVector, scalar, or sequence to a validated length-m array."""
    if isinstance(costs, CostVector):
        arr = costs.costs
    elif np.isscalar(costs):
        arr = np.full(m, float(costs))
    else:
        arr = as_float_vector(costs, "costs")
    if arr.shape[0] != m:
        raise CostLengthMismatch(f"{arr.shape[0]} costs for {m} assets")
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise DataError("costs must lie in [0, 1)")
    return np.array(arr, dtype=float)


@dataclass(frozen=True)
class CompoundPanel:
    """n-period compound returns per asset, raw and fee-adjusted.

    ``raw[s, i]`` is the compound simple return of asset i over block s,
    i.e. the product of gross per-period returns minus one. The
    fee-adjusted entries subtract the per-rebalance cost:
    ``fee_adjusted = raw - costs``. ``block_mode`` records how blocks were
    formed ("nonoverlap", "overlap", or "direct" for distributions given
    as explicit block samples).
    """

    n: int
    assets: tuple
    raw: np.ndarray
    fee_adjusted: np.ndarray
    block_mode: str = "direct"
    costs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise PeriodExceedsData(f"period n must be >= 1, got {self.n}")
        if self.block_mode not in BLOCK_MODES:
            raise ConfigError(f"unknown block mode {self.block_mode!r}")
        raw = np.asarray(self.raw, dtype=float)
        fee = np.asarray(self.fee_adjusted, dtype=float)
        if raw.ndim != 2 or raw.shape[0] < 1:
            raise DataError("raw compound returns must be a non-empty 2-D array")
        if raw.shape != fee.shape:
            raise DataError("raw and fee-adjusted arrays must share a shape")
        if np.any(raw <= -1.0):
            raise DataError("compound returns of -100% or worse are not representable")
        assets = tuple(str(a) for a in self.assets)
        if len(assets) != raw.shape[1]:
            raise DataError(f"{len(assets)} asset names for {raw.shape[1]} columns")
        costs = self.costs
        if costs is None:
            costs = raw[0] - fee[0]
        costs = as_cost_array(costs, raw.shape[1])
        if not np.allclose(raw - costs, fee, rtol=0.0, atol=1e-12):
            raise DataError("fee-adjusted returns must equal raw - costs")
        object.__setattr__(self, "assets", assets)
        object.__setattr__(self, "raw", readonly(raw))
        object.__setattr__(self, "fee_adjusted", readonly(fee))
        object.__setattr__(self, "costs", readonly(costs))

    @property
    def n_blocks(self) -> int:
        return self.raw.shape[0]

    @property
    def n_assets(self) -> int:
        return self.raw.shape[1]

    @classmethod
    def from_blocks(cls, raw, costs=0.0, n: int = 1, assets=None,
                    block_mode: str = "direct") -> "CompoundPanel":
        """Build a panel directly from block-level compound return samples."""
        raw = np.asarray(raw, dtype=float)
        if raw.ndim == 1:
            raw = raw[:, None]
        m = raw.shape[1]
        costs = as_cost_array(costs, m)
        if assets is None:
            assets = tuple(f"A{i}" for i in range(m))
        return cls(n, tuple(assets), raw, raw - costs, block_mode, costs)


def compound(panel: ReturnPanel, n: int, costs, mode: str = "nonoverlap") -> CompoundPanel:
    """Compound a return panel into n-period blocks and subtract costs.

    Non-overlapping mode forms floor(T/n) blocks, dropping the trailing
    remainder; overlapping mode forms T-n+1 blocks with stride one.
    """
    if n < 1:
        raise PeriodExceedsData(f"period n must be >= 1, got {n}")
    T = panel.n_periods
    if n > T:
        raise PeriodExceedsData(f"period n={n} exceeds the {T} available period(s)")
    gross = 1.0 + panel.samples
    if mode == "nonoverlap":
        S = T // n
        blocks = gross[: S * n].reshape(S, n, panel.n_assets)
        raw = blocks.prod(axis=1) - 1.0
    elif mode == "overlap":
        windows = np.lib.stride_tricks.sliding_window_view(gross, n, axis=0)
        raw = windows.prod(axis=2) - 1.0
    else:
        raise ConfigError(f"unknown block mode {mode!r}")
    costs = as_cost_array(costs, panel.n_assets)
    return CompoundPanel(n, panel.assets, raw, raw - costs, mode, costs)


def compound_extremes(x_min: float, x_max: float, n: int):
    """Range of an n-period compound return when each period lies in [x_min, x_max]."""
    if n < 1:
        raise PeriodExceedsData(f"period n must be >= 1, got {n}")
    if x_min <= -1.0:
        raise DataError("per-period lower bound must exceed -1")
    if x_max < x_min:
        raise DataError("x_max must be >= x_min")
    return (1.0 + x_min) ** n - 1.0, (1.0 + x_max) ** n - 1.0


# -- CSV interfaces -----------------------------------------------------

def _parse_timestamp(text: str, kind: list, lineno: int):
    text = text.strip()
    try:
        value = int(text)
        this_kind = "int"
    except ValueError:
        try:
            value = _dt.datetime.fromisoformat(text)
            this_kind = "datetime"
        except ValueError:
            raise MalformedRow(f"line {lineno}: cannot parse timestamp {text!r}") from None
    if kind and kind[0] != this_kind:
        raise MalformedRow(
            f"line {lineno}: timestamp {text!r} is {this_kind}, file started with {kind[0]}"
        )
    if not kind:
        kind.append(this_kind)
    return value


def read_price_csv(path) -> list:
    """Read a long-format price CSV with header ``timestamp,symbol,price``.

    Timestamps are ISO-8601 strings or plain integer indices (homogeneous
    within a file). Returns one PriceSeries per symbol, in first-seen
    order. Parse failures name the offending line.
    """
    by_symbol: dict = {}
    kind: list = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow("line 1: empty file") from None
        expected = ["timestamp", "symbol", "price"]
        if [h.strip().lower() for h in header] != expected:
            raise MalformedRow(
                f"line 1: header must be {','.join(expected)}, got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise MalformedRow(f"line {lineno}: expected 3 fields, got {len(row)}")
            ts = _parse_timestamp(row[0], kind, lineno)
            symbol = row[1].strip()
            if not symbol:
                raise MalformedRow(f"line {lineno}: empty symbol")
            try:
                price = float(row[2])
            except ValueError:
                raise MalformedRow(f"line {lineno}: cannot parse price {row[2]!r}") from None
            if price <= 0.0:
                raise NonPositivePrice(f"line {lineno}: non-positive price for {symbol!r}")
            by_symbol.setdefault(symbol, []).append((ts, price, lineno))

    out = []
    for symbol, rows in by_symbol.items():
        ts = tuple(r[0] for r in rows)
        prices = np.array([r[1] for r in rows])
        for k in range(1, len(ts)):
            if not ts[k - 1] < ts[k]:
                raise MalformedRow(
                    f"line {rows[k][2]}: timestamps for {symbol!r} must be strictly increasing"
                )
        out.append(PriceSeries(symbol, ts, prices))
    return out


def write_compound_csv(cp: CompoundPanel, path) -> None:
    """Export a compound panel as ``block,asset,raw,fee_adjusted`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block", "asset", "raw", "fee_adjusted"])
        for s in range(cp.n_blocks):
            for i, name in enumerate(cp.assets):
                writer.writerow([s, name, repr(cp.raw[s, i]), repr(cp.fee_adjusted[s, i])])
