"""Account-level simulation of rebalanced portfolios with per-trade costs.

The account recursion over one n-period block starting at time t0 with
weight K and account value V(t0) marks, for 1 <= j <= n,

    V(t0 + j) = V(t0) * (1 + sum_i K_i * (G_i(t0, t0+j) - 1) - sum_i K_i c_i),

where G_i is asset i's gross compound return since the rebalance. Between
rebalances holdings drift (shares are fixed within a block); the cost of
putting the full allocation to work is reflected from the first mark of
the block. At j = n this reduces to V * (1 + K'(X_n - c)), the compound
fee-adjusted growth form, and the two views coincide exactly.

Buy-and-hold pays costs once at time zero and never trades again.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConfigError,
    DataError,
    NonPositiveValue,
    PeriodExceedsData,
)
from .market_data import ReturnPanel, as_cost_array
from .validation import as_float_matrix, as_float_vector, check_weight_vector


@dataclass(frozen=True)
class FixedWeight:
    """Rebalance to the same weight vector every block."""

    weight: object

    def label(self) -> str:
        return "fixed_weight"


@dataclass(frozen=True)
class BuyAndHold:
    """Buy once at time zero (equal weight when none given), never trade again."""

    weight: object = None

    def label(self) -> str:
        return "buy_and_hold"


@dataclass(frozen=True)
class ScheduleStrategy:
    """Follow a precomputed weight per rebalance time.

    ``times`` are block indices (the first must be 0); each weight holds
    from its time until the next entry. The account still rebalances, and
    pays costs, at every block boundary.
    """

    times: object
    weights: object

    def label(self) -> str:
        return "schedule"


@dataclass(frozen=True)
class BacktestConfig:
    n: int
    costs: object
    strategy: object
    r_f: float = 0.0
    initial_value: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"period n must be >= 1, got {self.n}")
        if not (math.isfinite(self.initial_value) and self.initial_value > 0.0):
            raise ConfigError("initial_value must be positive")
        if not math.isfinite(self.r_f):
            raise ConfigError("r_f must be finite")
        if not isinstance(self.strategy, (FixedWeight, BuyAndHold, ScheduleStrategy)):
            raise ConfigError(f"unknown strategy {self.strategy!r}")


@dataclass(frozen=True)
class Metrics:
    """The five account metrics plus a degeneracy flag.

    Volatility is the sample standard deviation (N-1 normaliser) of the
    per-period account returns, and the Sharpe entry is sqrt(N) times the
    per-period Sharpe ratio against ``r_f``. With fewer than two returns,
    or zero return dispersion, volatility and Sharpe are reported as 0
    with ``degenerate`` set.
    """

    cumulative_return: float
    log_growth: float
    volatility: float
    max_drawdown: float
    sharpe: float
    n_periods: int
    degenerate: bool

    def to_dict(self) -> dict:
        return {
            "cumulative_return": self.cumulative_return,
            "log_growth": self.log_growth if math.isfinite(self.log_growth) else None,
            "volatility": self.volatility,
            "max_drawdown": self.max_drawdown,
            "sharpe": self.sharpe,
            "n_periods": self.n_periods,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class BacktestReport:
    trajectory: np.ndarray
    cumulative_return: float
    log_growth: float
    volatility: float
    max_drawdown: float
    sharpe: float
    n_periods: int
    degenerate: bool
    bankrupt: bool

    def to_dict(self, include_trajectory: bool = False) -> dict:
        out = {
            "cumulative_return": self.cumulative_return,
            "log_growth": self.log_growth if math.isfinite(self.log_growth) else None,
            "volatility": self.volatility,
            "max_drawdown": self.max_drawdown,
            "sharpe": self.sharpe,
            "n_periods": self.n_periods,
            "degenerate": self.degenerate,
            "bankrupt": self.bankrupt,
        }
        if include_trajectory:
            out["trajectory"] = self.trajectory.tolist()
        return out


def _metrics_core(V: np.ndarray, r_f: float, bankrupt: bool) -> Metrics:
    R = V[1:] / V[:-1] - 1.0
    N = R.shape[0]
    if bankrupt:
        # the account is wiped out: total loss, regardless of how far the
        # final mark overshoots zero
        cumulative = -1.0
        log_growth = float("-inf")
        max_dd = 1.0
    else:
        cumulative = float(V[-1] / V[0] - 1.0)
        log_growth = float(np.log(V[-1] / V[0]))
        running_max = np.maximum.accumulate(V)
        max_dd = float(((running_max - V) / running_max).max())
    degenerate = False
    if N < 2:
        volatility = 0.0
        sharpe = 0.0
        degenerate = True
    else:
        s = float(R.std(ddof=1))
        volatility = s
        if s == 0.0:
            sharpe = 0.0
            degenerate = True
        else:
            sharpe = float(math.sqrt(N) * (R.mean() - r_f) / s)
    return Metrics(cumulative, log_growth, volatility, max_dd, sharpe, N, degenerate)


def compute_metrics(trajectory, r_f: float = 0.0) -> Metrics:
    """Metrics for a strictly positive account trajectory (length >= 2)."""
    V = as_float_vector(trajectory, "trajectory")
    if V.shape[0] < 2:
        raise DataError("trajectory needs at least two values")
    if np.any(V <= 0.0):
        raise NonPositiveValue("trajectory contains a non-positive account value")
    return _metrics_core(V, r_f, bankrupt=False)


def _weight_for_blocks(strategy, m: int, n_blocks: int) -> np.ndarray:
    """Per-block weight matrix (n_blocks, m) for rebalanced strategies."""
    if isinstance(strategy, FixedWeight):
        K = check_weight_vector(strategy.weight, m)
        _require_simplex(K)
        return np.tile(K, (n_blocks, 1))
    times = np.asarray(strategy.times, dtype=int)
    W = as_float_matrix(strategy.weights, "schedule weights")
    if times.ndim != 1 or times.shape[0] != W.shape[0]:
        raise ConfigError("schedule times and weights must align")
    if W.shape[1] != m:
        raise ConfigError(f"schedule weights have {W.shape[1]} columns, panel has {m}")
    if times.shape[0] == 0 or times[0] != 0:
        raise ConfigError("schedule must start at block 0")
    if np.any(np.diff(times) <= 0):
        raise ConfigError("schedule times must be strictly increasing")
    for row in W:
        _require_simplex(row)
    idx = np.searchsorted(times, np.arange(n_blocks), side="right") - 1
    return W[idx]


def _require_simplex(K: np.ndarray) -> None:
    if np.any(K < 0.0) or abs(K.sum() - 1.0) > 1e-9:
        raise ConfigError("strategy weights must be non-negative and sum to 1")


def run_backtest(panel: ReturnPanel, cfg: BacktestConfig) -> BacktestReport:
    """Simulate one strategy on a panel and report its trajectory and metrics.

    Rebalanced strategies use the first floor(T/n)*n periods (the trailing
    remainder is dropped); buy-and-hold uses the same horizon so reports
    stay comparable. If the account value ever reaches zero or below, the
    trajectory is truncated at the first such mark and the report is
    flagged bankrupt (log growth -inf).
    """
    X = panel.samples
    T, m = X.shape
    n = cfg.n
    if n > T:
        raise PeriodExceedsData(f"period n={n} exceeds the {T} available period(s)")
    S = T // n
    N = S * n
    costs = as_cost_array(cfg.costs, m)
    V0 = float(cfg.initial_value)
    V = np.empty(N + 1)
    V[0] = V0

    if isinstance(cfg.strategy, BuyAndHold):
        K = cfg.strategy.weight
        K = np.full(m, 1.0 / m) if K is None else check_weight_vector(K, m)
        _require_simplex(K)
        G = np.cumprod(1.0 + X[:N], axis=0)
        V[1:] = V0 * (1.0 + (G - 1.0) @ K - costs @ K)
    else:
        W = _weight_for_blocks(cfg.strategy, m, S)
        fee = costs @ W.T  # per-block cost drag
        for block in range(S):
            base = V[block * n]
            if base <= 0.0:
                break
            Gblk = np.cumprod(1.0 + X[block * n : (block + 1) * n], axis=0)
            V[block * n + 1 : (block + 1) * n + 1] = base * (
                1.0 + (Gblk - 1.0) @ W[block] - fee[block]
            )

    bankrupt = False
    nonpos = np.flatnonzero(V[1:] <= 0.0)
    if nonpos.size:
        V = V[: nonpos[0] + 2]  # keep the first non-positive mark
        bankrupt = True
    metrics = _metrics_core(V, cfg.r_f, bankrupt)
    return BacktestReport(
        trajectory=V,
        cumulative_return=metrics.cumulative_return,
        log_growth=metrics.log_growth,
        volatility=metrics.volatility,
        max_drawdown=metrics.max_drawdown,
        sharpe=metrics.sharpe,
        n_periods=metrics.n_periods,
        degenerate=metrics.degenerate,
        bankrupt=bankrupt,
    )


def compare_strategies(panel: ReturnPanel, cfgs) -> list:
    """Run several configurations on the same panel, in the given order."""
    return [run_backtest(panel, cfg) for cfg in cfgs]


def write_trajectory_csv(trajectory, path) -> None:
    """Export an account trajectory as ``period,value`` rows."""
    V = as_float_vector(trajectory, "trajectory")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "value"])
        for t, v in enumerate(V):
            writer.writerow([t, repr(float(v))])
