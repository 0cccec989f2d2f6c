"""Walk-forward re-optimisation over a sliding window of blocks.

The panel is cut into non-overlapping n-period blocks. A stage is one
block boundary. With window size M, the weight applied at stage s is
solved on blocks s-M .. s-1 only (never on data at or after stage s), so
the procedure is free of look-ahead by construction. Stages 0 .. M-1 are
warm-up: the schedule holds the riskless vertex (or a caller-supplied
warm-up weight). The schedule also carries the weight solved on the final
M blocks (stage S), which is the deployment weight for the next, not yet
observed, block.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .backtest import BacktestConfig, BacktestReport, ScheduleStrategy, run_backtest
from .exceptions import ConfigError, WindowExceedsData
from .market_data import CompoundPanel, ReturnPanel, as_cost_array, compound
from .objective import moments
from .solver import SolveReport, SolveStatus, SolverConfig, solve_approx, solve_exact
from .validation import as_float_matrix, check_weight_vector, readonly


@dataclass(frozen=True)
class OnlineConfig:
    window: int
    n: int = 1
    problem: str = "approx"
    costs: object = 0.0
    solver: SolverConfig | None = None
    warmup_weight: object = None
    r_f: float = 0.0
    initial_value: float = 1.0

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        if self.n < 1:
            raise ConfigError(f"period n must be >= 1, got {self.n}")
        if self.problem not in ("exact", "approx"):
            raise ConfigError(f"problem must be 'exact' or 'approx', got {self.problem!r}")


@dataclass(frozen=True)
class WeightSchedule:
    """Weights per rebalance stage plus the solves that produced them.

    ``times[k]`` is the stage (block index) at which ``weights[k]`` is
    applied. ``solve_reports[k]`` is None for warm-up stages.
    ``carried_forward[k]`` is True where a failed solve fell back to the
    previous stage's weight.
    """

    times: np.ndarray
    weights: np.ndarray
    solve_reports: tuple
    carried_forward: tuple

    def __post_init__(self):
        times = np.asarray(self.times, dtype=int)
        W = as_float_matrix(self.weights, "schedule weights")
        if times.shape[0] != W.shape[0]:
            raise ConfigError("times and weights must align")
        if len(self.solve_reports) != times.shape[0]:
            raise ConfigError("one solve report slot per stage required")
        object.__setattr__(self, "times", readonly(times).astype(int))
        object.__setattr__(self, "weights", readonly(W))
        object.__setattr__(self, "carried_forward", tuple(bool(b) for b in self.carried_forward))

    @property
    def n_stages(self) -> int:
        return self.times.shape[0]

    @property
    def deployment_weight(self) -> np.ndarray:
        return self.weights[-1]

    def to_strategy(self, n_blocks: int) -> ScheduleStrategy:
        """Strategy covering the first ``n_blocks`` tradable stages."""
        if n_blocks > self.n_stages:
            raise ConfigError(
                f"schedule has {self.n_stages} stage(s), {n_blocks} requested"
            )
        return ScheduleStrategy(self.times[:n_blocks], self.weights[:n_blocks])


def run_online(panel: ReturnPanel, cfg: OnlineConfig) -> WeightSchedule:
    """Roll the chosen solver across the panel's blocks.

    Requires at least ``window`` blocks (else WindowExceedsData). The
    warm-up weight defaults to the riskless vertex, so a panel without a
    riskless column needs an explicit ``warmup_weight``. A stage whose
    solve fails (infeasible exact problem) re-applies the previous
    stage's weight and is flagged carried-forward.
    """
    cp = compound(panel, cfg.n, as_cost_array(cfg.costs, panel.n_assets), "nonoverlap")
    S = cp.n_blocks
    M = cfg.window
    if S < M:
        raise WindowExceedsData(
            f"window of {M} block(s) exceeds the {S} available block(s)"
        )
    m = panel.n_assets
    if cfg.warmup_weight is not None:
        warmup = check_weight_vector(cfg.warmup_weight, m, "warmup_weight")
    elif panel.riskless_index is not None:
        warmup = np.zeros(m)
        warmup[panel.riskless_index] = 1.0
    else:
        raise ConfigError(
            "panel has no riskless column; supply warmup_weight for the warm-up stages"
        )

    weights = np.empty((S + 1, m))
    reports: list = [None] * (S + 1)
    carried = [False] * (S + 1)
    weights[:M] = warmup
    last_good = warmup
    for stage in range(M, S + 1):
        window_cp = CompoundPanel.from_blocks(
            cp.raw[stage - M : stage], cp.costs, cfg.n, cp.assets
        )
        report = _solve_window(window_cp, cfg)
        reports[stage] = report
        if report.weight is None:
            weights[stage] = last_good
            carried[stage] = True
        else:
            weights[stage] = np.asarray(report.weight)
            last_good = weights[stage]
    return WeightSchedule(np.arange(S + 1), weights, tuple(reports), tuple(carried))


def _solve_window(window_cp: CompoundPanel, cfg: OnlineConfig) -> SolveReport:
    if cfg.problem == "exact":
        return solve_exact(window_cp, cfg.solver)
    return solve_approx(moments(window_cp), cfg.n, cfg.solver)


def online_backtest(panel: ReturnPanel, cfg: OnlineConfig,
                    schedule: WeightSchedule | None = None) -> BacktestReport:
    """Account simulation of the walk-forward schedule on the same panel."""
    if schedule is None:
        schedule = run_online(panel, cfg)
    S = panel.n_periods // cfg.n
    bt_cfg = BacktestConfig(
        n=cfg.n,
        costs=as_cost_array(cfg.costs, panel.n_assets),
        strategy=schedule.to_strategy(S),
        r_f=cfg.r_f,
        initial_value=cfg.initial_value,
    )
    return run_backtest(panel, bt_cfg)


def write_schedule_csv(schedule: WeightSchedule, assets, path) -> None:
    """Export a schedule as long-format ``rebalance_index,asset,weight`` rows."""
    assets = list(assets)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rebalance_index", "asset", "weight"])
        for k in range(schedule.n_stages):
            for i, name in enumerate(assets):
                writer.writerow([int(schedule.times[k]), name, repr(float(schedule.weights[k, i]))])
