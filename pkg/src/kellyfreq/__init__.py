"""Growth-optimal portfolio selection with proportional trading costs.

The package solves for long-only portfolio weights that maximize expected
log growth when returns compound over multi-period rebalancing blocks and
every rebalance pays a proportional fee. It covers the exact concave
program, its quadratic surrogate, optimality certificates, dominance and
survival diagnostics, frontier sampling, backtesting, and walk-forward
(sliding window) trading, plus scikit-learn style estimators and a CLI.
"""

from .analysis import (
    DominanceReport,
    FrontierPoint,
    SurvivalReport,
    dominance_check,
    frontier,
    survival_monte_carlo,
    survival_necessary,
    survival_sufficient,
    two_fund_check,
    write_frontier_csv,
)
from .backtest import (
    BacktestConfig,
    BacktestReport,
    BuyAndHold,
    FixedWeight,
    Metrics,
    ScheduleStrategy,
    compare_strategies,
    compute_metrics,
    run_backtest,
    write_trajectory_csv,
)
from .estimators import KellyPortfolio, SlidingWindowKelly
from .exceptions import ConfigError, DataError, KellyFreqError
from .market_data import (
    CompoundPanel,
    CostVector,
    PriceSeries,
    ReturnPanel,
    assemble_panel,
    compound,
    compound_extremes,
    read_price_csv,
    to_returns,
    write_compound_csv,
)
from .objective import (
    MomentPair,
    ObjectiveValue,
    SimplexWeight,
    approx_elg,
    approx_gradient,
    approximation_gap_bound,
    exact_elg,
    exact_gradient,
    moments,
    taylor_violation_fraction,
)
from .online import (
    OnlineConfig,
    WeightSchedule,
    online_backtest,
    run_online,
    write_schedule_csv,
)
from .solver import (
    SolveReport,
    SolveStatus,
    SolverConfig,
    exact_kkt_residual,
    grid_oracle,
    kkt_residual,
    lattice_size,
    project_simplex,
    solve_approx,
    solve_exact,
)

__version__ = "0.1.0"

__all__ = [
    "BacktestConfig",
    "BacktestReport",
    "BuyAndHold",
    "CompoundPanel",
    "ConfigError",
    "CostVector",
    "DataError",
    "DominanceReport",
    "FixedWeight",
    "FrontierPoint",
    "KellyFreqError",
    "KellyPortfolio",
    "Metrics",
    "MomentPair",
    "ObjectiveValue",
    "OnlineConfig",
    "PriceSeries",
    "ReturnPanel",
    "ScheduleStrategy",
    "SimplexWeight",
    "SlidingWindowKelly",
    "SolveReport",
    "SolveStatus",
    "SolverConfig",
    "SurvivalReport",
    "WeightSchedule",
    "approx_elg",
    "approx_gradient",
    "approximation_gap_bound",
    "assemble_panel",
    "compare_strategies",
    "compound",
    "compound_extremes",
    "compute_metrics",
    "dominance_check",
    "exact_elg",
    "exact_gradient",
    "exact_kkt_residual",
    "frontier",
    "grid_oracle",
    "kkt_residual",
    "lattice_size",
    "moments",
    "online_backtest",
    "project_simplex",
    "read_price_csv",
    "run_backtest",
    "run_online",
    "solve_approx",
    "solve_exact",
    "survival_monte_carlo",
    "survival_necessary",
    "survival_sufficient",
    "taylor_violation_fraction",
    "to_returns",
    "two_fund_check",
    "write_compound_csv",
    "write_frontier_csv",
    "write_schedule_csv",
    "write_trajectory_csv",
]
