"""Command-line front end for batch optimization, analysis, and backtesting.

Every subcommand reads a long-format price CSV, writes machine-readable
reports into ``--out``, and prints a short human summary. Outputs are
deterministic: identical inputs, flags, and seed produce byte-identical
files (sorted JSON keys, repr-formatted floats, no timestamps).

Exit codes: 0 success, 1 data error (unreadable or invalid input data),
2 configuration error (bad flags, config file, or parameter domains).
"""

from __future__ import annotations

import functools
import json
import os

import click
import numpy as np

from .analysis import dominance_check, frontier, survival_necessary, survival_sufficient
from .backtest import (
    BacktestConfig,
    BuyAndHold,
    FixedWeight,
    ScheduleStrategy,
    run_backtest,
    write_trajectory_csv,
)
from .exceptions import (
    ConfigError,
    DataError,
    NonPositiveGross,
    PeriodExceedsData,
)
from .market_data import (
    CompoundPanel,
    CostVector,
    assemble_panel,
    compound,
    read_price_csv,
    to_returns,
)
from .objective import exact_elg, moments, taylor_violation_fraction
from .online import OnlineConfig, online_backtest, run_online, write_schedule_csv
from .solver import (
    SolverConfig,
    SolveStatus,
    exact_kkt_residual,
    kkt_residual,
    solve_approx,
    solve_exact,
)

MODES = ("exact", "approx", "both")
FORMATS = ("json", "csv")
BLOCK_CHOICES = ("nonoverlap", "overlap")

DEFAULTS = {
    "input": None,
    "n": 1,
    "cost": "0",
    "rf": None,
    "window": None,
    "split": 0.5,
    "seed": 0,
    "out": ".",
    "format": "json",
    "mode": "both",
    "blocks": "nonoverlap",
    "kkt_tol": 1e-8,
    "max_iters": 2000,
}

COMBO_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)
METRIC_ROWS = (
    "cumulative_return",
    "log_growth",
    "volatility",
    "max_drawdown",
    "sharpe",
    "n_periods",
    "degenerate",
    "bankrupt",
)


def _as_int(value, name: str, minimum: int) -> int:
    try:
        out = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {value!r}") from None
    if float(value) != out:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if out < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {out}")
    return out


def _as_float(value, name: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None


def _merge_config(config_path, overrides: dict) -> dict:
    """Layer resolved settings: defaults, then config file, then flags."""
    cfg = dict(DEFAULTS)
    if config_path is not None:
        if not os.path.exists(config_path):
            raise ConfigError(f"config file not found: {config_path}")
        with open(config_path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(data)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return _validate_config(cfg)


def _validate_config(cfg: dict) -> dict:
    if cfg["input"] is None:
        raise ConfigError("--input is required (flag or config file)")
    cfg["input"] = str(cfg["input"])
    cfg["n"] = _as_int(cfg["n"], "--n", 1)
    if isinstance(cfg["cost"], (int, float)):
        cfg["cost"] = repr(float(cfg["cost"]))
    if cfg["rf"] is not None:
        cfg["rf"] = _as_float(cfg["rf"], "--rf")
        if cfg["rf"] < 0.0:
            raise ConfigError(f"--rf must be >= 0, got {cfg['rf']}")
    if cfg["window"] is not None:
        cfg["window"] = _as_int(cfg["window"], "--window", 1)
    cfg["split"] = _as_float(cfg["split"], "--split")
    if not 0.0 < cfg["split"] < 1.0:
        raise ConfigError(f"--split must lie strictly between 0 and 1, got {cfg['split']}")
    cfg["seed"] = _as_int(cfg["seed"], "--seed", 0)
    cfg["out"] = str(cfg["out"])
    for key, choices in (("format", FORMATS), ("mode", MODES), ("blocks", BLOCK_CHOICES)):
        if cfg[key] not in choices:
            raise ConfigError(f"--{key} must be one of {', '.join(choices)}, got {cfg[key]!r}")
    cfg["kkt_tol"] = _as_float(cfg["kkt_tol"], "--kkt-tol")
    if cfg["kkt_tol"] <= 0.0:
        raise ConfigError("--kkt-tol must be positive")
    cfg["max_iters"] = _as_int(cfg["max_iters"], "--max-iters", 1)
    return cfg


def _solver_config(cfg: dict) -> SolverConfig:
    return SolverConfig(max_iters=cfg["max_iters"], kkt_tol=cfg["kkt_tol"])


class _Market:
    """Loaded input: compounded blocks plus panel-level context."""

    def __init__(self, assets, cp, costs, per_period, panel=None):
        self.assets = tuple(assets)
        self.cp = cp
        self.costs = costs
        self.per_period = per_period
        self.panel = panel


def _load_panel(cfg: dict):
    path = cfg["input"]
    if not os.path.exists(path):
        raise DataError(f"input file not found: {path}")
    series = read_price_csv(path)
    rf = cfg["rf"]
    panel = assemble_panel(series, rf=rf if rf is not None else 0.0,
                           include_riskless=rf is not None)
    return panel


def _load_market(cfg: dict) -> _Market:
    """Build the block panel, taking the direct route for one bare symbol."""
    path = cfg["input"]
    if not os.path.exists(path):
        raise DataError(f"input file not found: {path}")
    series = read_price_csv(path)
    n, mode = cfg["n"], cfg["blocks"]
    if len(series) == 1 and cfg["rf"] is None:
        one = series[0]
        r = to_returns(one)
        if n > r.shape[0]:
            raise PeriodExceedsData(f"period {n} exceeds the {r.shape[0]} available returns")
        if mode == "nonoverlap":
            blocks = r[: (r.shape[0] // n) * n].reshape(-1, n)
        else:
            blocks = np.lib.stride_tricks.sliding_window_view(r, n)
        raw = np.prod(1.0 + blocks, axis=1) - 1.0
        costs = CostVector.from_spec(cfg["cost"], (one.symbol,)).costs
        cp = CompoundPanel.from_blocks(raw, costs, n=n, assets=(one.symbol,),
                                       block_mode=mode)
        return _Market((one.symbol,), cp, costs, r[:, None])
    rf = cfg["rf"]
    panel = assemble_panel(series, rf=rf if rf is not None else 0.0,
                           include_riskless=rf is not None)
    costs = CostVector.from_spec(cfg["cost"], panel.assets).costs
    cp = compound(panel, n, costs, mode)
    return _Market(panel.assets, cp, costs, panel.samples, panel)


def _write_json(out_dir: str, name: str, payload) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _fmt(value) -> str:
    return _cell(value) if value is not None else "None"


def _solve_summary(name: str, report) -> str:
    weight = report.weight.tolist() if report.weight is not None else None
    return (f"{name}: status={report.status.value}"
            f" objective={_fmt(report.to_dict()['objective'])}"
            f" kkt_residual={_fmt(report.to_dict()['kkt_residual'])}"
            f" weight={weight}")


def _survival_payload(market: _Market, n: int, K) -> dict:
    x_min = market.per_period.min(axis=0)
    flags = survival_sufficient(x_min, market.costs, n)
    necessary = None
    if K is not None and np.all(market.costs > 0.0):
        mu = market.per_period.mean(axis=0)
        necessary = bool(survival_necessary(mu, market.costs, n, K))
    return {
        "sufficient_per_asset": [bool(b) for b in flags],
        "sufficient_ok": bool(np.all(flags)),
        "necessary_ok": necessary,
        "weight": [float(w) for w in K] if K is not None else None,
    }


def _dominance_payload(cp: CompoundPanel) -> dict:
    try:
        return dominance_check(cp).to_dict()
    except NonPositiveGross as exc:
        return {"dominant_assets": [], "ratios": None, "undefined": str(exc)}


def _cli_errors(fn):
    """Map domain exceptions onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(2) from None
        except DataError as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(1) from None

    return wrapper


def _common_options(fn):
    options = [
        click.option("--input", "input_", type=str, default=None,
                     help="Price CSV with header timestamp,symbol,price."),
        click.option("--config", "config_path", type=str, default=None,
                     help="JSON file mirroring the flags; flags override it."),
        click.option("--n", type=int, default=None,
                     help="Rebalancing period in data periods (default 1)."),
        click.option("--cost", type=str, default=None,
                     help="Proportional cost: global fraction or SYM=frac,... (default 0)."),
        click.option("--rf", type=float, default=None,
                     help="Append a riskless CASH column with this per-period rate."),
        click.option("--window", type=int, default=None,
                     help="Sliding estimation window in blocks (online only)."),
        click.option("--split", type=float, default=None,
                     help="Train fraction for backtest splits (default 0.5)."),
        click.option("--seed", type=int, default=None,
                     help="Seed for sampled outputs (default 0)."),
        click.option("--out", type=str, default=None,
                     help="Output directory (default current directory)."),
        click.option("--format", "format_", type=click.Choice(FORMATS), default=None,
                     help="Metrics table format (default json)."),
        click.option("--mode", type=click.Choice(MODES), default=None,
                     help="Solve the exact objective, the quadratic one, or both."),
        click.option("--blocks", type=click.Choice(BLOCK_CHOICES), default=None,
                     help="Block compounding scheme (default nonoverlap)."),
        click.option("--kkt-tol", type=float, default=None,
                     help="Optimality certificate tolerance (default 1e-8)."),
        click.option("--max-iters", type=int, default=None,
                     help="Solver iteration cap (default 2000)."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _resolve(config_path, **overrides) -> dict:
    overrides["input"] = overrides.pop("input_", None)
    overrides["format"] = overrides.pop("format_", None)
    cfg = _merge_config(config_path, overrides)
    os.makedirs(cfg["out"], exist_ok=True)
    return cfg


@click.group()
def main():
    """Growth-optimal rebalancing under proportional trading costs."""


@main.command()
@_common_options
@_cli_errors
def optimize(config_path, **overrides):
    """Solve for optimal weights; report dominance and survival checks."""
    cfg = _resolve(config_path, **overrides)
    market = _load_market(cfg)
    mom = moments(market.cp)
    scfg = _solver_config(cfg)
    out = cfg["out"]

    exact_report = None
    approx_report = None
    if cfg["mode"] in ("exact", "both"):
        exact_report = solve_exact(market.cp, scfg)
        _write_json(out, "solve_exact.json", exact_report.to_dict())
        click.echo(_solve_summary("exact", exact_report))
    infeasible = (exact_report is not None
                  and exact_report.status is SolveStatus.INFEASIBLE_EXACT)
    if cfg["mode"] in ("approx", "both") or infeasible:
        if infeasible and cfg["mode"] == "exact":
            click.echo("exact problem infeasible; falling back to the quadratic surrogate")
        approx_report = solve_approx(mom, market.cp.n, scfg)
        _write_json(out, "solve_approx.json", approx_report.to_dict())
        click.echo(_solve_summary("approx", approx_report))

    if exact_report is not None and exact_report.weight is not None:
        chosen, label = np.asarray(exact_report.weight), "exact"
    elif approx_report is not None:
        chosen, label = np.asarray(approx_report.weight), "approx"
    else:
        chosen, label = None, "none"

    dom = _dominance_payload(market.cp)
    _write_json(out, "dominance.json", dom)
    click.echo(f"dominance: dominant_assets={dom['dominant_assets']}")

    survival = _survival_payload(market, market.cp.n, chosen)
    _write_json(out, "survival.json", survival)
    click.echo(f"survival: sufficient_ok={survival['sufficient_ok']}"
               f" necessary_ok={survival['necessary_ok']}")
    if chosen is not None:
        frac = taylor_violation_fraction(market.cp, chosen)
        click.echo(f"taylor_violation_fraction={repr(frac)} at {label} weight")


def _frontier_row_stats(cp: CompoundPanel, K: np.ndarray):
    value = exact_elg(cp, K)
    if not value.finite:
        return float("-inf"), None
    logs = np.log(1.0 + cp.fee_adjusted @ K)
    return float(logs.mean() / cp.n), float(logs.var())


@main.command(name="frontier")
@_common_options
@_cli_errors
def frontier_cmd(config_path, **overrides):
    """Sample the (log-variance, growth) feasible region to a plot-ready CSV."""
    cfg = _resolve(config_path, **overrides)
    market = _load_market(cfg)
    cp = market.cp
    scfg = _solver_config(cfg)
    points = frontier(cp, samples=512, seed=cfg["seed"], bins=20, cfg=scfg)

    rows = []
    if cp.n_assets > 1:
        mom = moments(cp)
        exact_report = solve_exact(cp, scfg)
        approx_report = solve_approx(mom, cp.n, scfg)
        K_approx = np.asarray(approx_report.weight)
        elg, var = _frontier_row_stats(cp, K_approx)
        rows.append(("approx_opt", None, elg, var, None,
                     kkt_residual(mom, K_approx), K_approx))
        if exact_report.status is SolveStatus.INFEASIBLE_EXACT:
            click.echo("exact problem infeasible; endpoint and combination rows "
                       "use the quadratic optimum only")
        else:
            K_exact = np.asarray(exact_report.weight)
            elg, var = _frontier_row_stats(cp, K_exact)
            rows.append(("exact_opt", None, elg, var, None,
                         exact_kkt_residual(cp, K_exact), K_exact))
            for alpha in COMBO_ALPHAS:
                K = alpha * K_exact + (1.0 - alpha) * K_approx
                elg, var = _frontier_row_stats(cp, K)
                rows.append(("combo", alpha, elg, var, None,
                             kkt_residual(mom, K), K))
    for p in points:
        rows.append(("sample", None, p.elg, p.log_variance, p.on_frontier,
                     None, np.asarray(p.weight)))

    path = os.path.join(cfg["out"], "frontier.csv")
    header = ["kind", "alpha", "elg", "log_variance", "on_frontier", "kkt_residual"]
    header += [f"w_{a}" for a in market.assets]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for kind, alpha, elg, var, on_front, resid, K in rows:
            cells = [kind, _cell(alpha), _cell(elg), _cell(var),
                     "" if on_front is None else str(int(on_front)), _cell(resid)]
            cells += [repr(float(w)) for w in K]
            fh.write(",".join(cells) + "\n")
    click.echo(f"frontier: {len(rows)} rows -> {path}")


def _write_metrics(cfg: dict, table: dict) -> str:
    """Persist the per-strategy metrics table as JSON or CSV."""
    out = cfg["out"]
    if cfg["format"] == "json":
        return _write_json(out, "metrics.json", table)
    path = os.path.join(out, "metrics.csv")
    names = list(table["strategies"])
    with open(path, "w") as fh:
        fh.write(",".join(["metric"] + names) + "\n")
        for row in METRIC_ROWS:
            cells = [row]
            for name in names:
                value = table["strategies"][name][row]
                cells.append(_cell(float("-inf")) if row == "log_growth" and value is None
                             else _cell(value))
            fh.write(",".join(cells) + "\n")
    return path


@main.command()
@_common_options
@_cli_errors
def backtest(config_path, **overrides):
    """Split the panel, optimize on the head, simulate on the tail."""
    cfg = _resolve(config_path, **overrides)
    panel = _load_panel(cfg)
    n = cfg["n"]
    T = panel.n_periods
    split_idx = int(T * cfg["split"])
    if split_idx < n:
        raise ConfigError(f"train split holds {split_idx} period(s); "
                          f"need at least one full block of {n}")
    if (T - split_idx) < n:
        raise ConfigError(f"test split holds {T - split_idx} period(s); "
                          f"need at least one full block of {n}")
    train = panel.window(0, split_idx)
    test = panel.window(split_idx, T)
    costs = CostVector.from_spec(cfg["cost"], panel.assets).costs
    scfg = _solver_config(cfg)
    cp_train = compound(train, n, costs, cfg["blocks"])
    r_f = cfg["rf"] if cfg["rf"] is not None else 0.0

    strategies = []
    train_solves = {}
    weights = {}
    if cfg["mode"] in ("exact", "both"):
        report = solve_exact(cp_train, scfg)
        train_solves["exact"] = report.to_dict()
        click.echo(_solve_summary("train exact", report))
        if report.weight is None:
            click.echo("exact problem infeasible on the train split; strategy skipped")
        else:
            weights["exact"] = np.asarray(report.weight)
            strategies.append(("exact", FixedWeight(weights["exact"])))
    if cfg["mode"] in ("approx", "both"):
        report = solve_approx(moments(cp_train), n, scfg)
        train_solves["approx"] = report.to_dict()
        click.echo(_solve_summary("train approx", report))
        weights["approx"] = np.asarray(report.weight)
        strategies.append(("approx", FixedWeight(weights["approx"])))
    strategies.append(("equal_bah", BuyAndHold()))

    per_strategy = {}
    for name, strategy in strategies:
        bt_cfg = BacktestConfig(n=n, costs=costs, strategy=strategy, r_f=r_f)
        report = run_backtest(test, bt_cfg)
        write_trajectory_csv(report.trajectory,
                             os.path.join(cfg["out"], f"trajectory_{name}.csv"))
        per_strategy[name] = report.to_dict()
        click.echo(f"{name}: cumulative_return={_fmt(per_strategy[name]['cumulative_return'])}"
                   f" log_growth={_fmt(per_strategy[name]['log_growth'])}"
                   f" max_drawdown={_fmt(per_strategy[name]['max_drawdown'])}")

    table = {
        "split": {"train_periods": split_idx, "test_periods": T - split_idx, "n": n},
        "weights": {k: [float(w) for w in v] for k, v in weights.items()},
        "train_solves": train_solves,
        "strategies": per_strategy,
    }
    path = _write_metrics(cfg, table)
    click.echo(f"metrics -> {path}")


@main.command()
@_common_options
@_cli_errors
def online(config_path, **overrides):
    """Walk-forward trading on a sliding estimation window."""
    cfg = _resolve(config_path, **overrides)
    if cfg["window"] is None:
        raise ConfigError("--window is required for online runs")
    panel = _load_panel(cfg)
    n, M = cfg["n"], cfg["window"]
    r_f = cfg["rf"] if cfg["rf"] is not None else 0.0
    problem = "exact" if cfg["mode"] == "exact" else "approx"
    costs = CostVector.from_spec(cfg["cost"], panel.assets).costs
    ocfg = OnlineConfig(window=M, n=n, problem=problem, costs=costs,
                        solver=_solver_config(cfg), r_f=r_f)
    schedule = run_online(panel, ocfg)
    S = panel.n_periods // n

    write_schedule_csv(schedule, panel.assets,
                       os.path.join(cfg["out"], "schedule.csv"))
    full = online_backtest(panel, ocfg, schedule)
    write_trajectory_csv(full.trajectory, os.path.join(cfg["out"], "trajectory.csv"))

    # Warm-up stages hold the riskless vertex, so realized performance is
    # measured on the traded stages alone (a fresh unit account from block M).
    traded = None
    if S > M:
        sub = panel.window(M * n, S * n)
        strategy = ScheduleStrategy(np.arange(S - M), schedule.weights[M:S])
        traded = run_backtest(sub, BacktestConfig(
            n=n, costs=costs, strategy=strategy, r_f=r_f))

    carried = [int(t) for t, flag in zip(schedule.times, schedule.carried_forward) if flag]
    payload = {
        "window": M,
        "n": n,
        "problem": problem,
        "n_stages": schedule.n_stages,
        "carried_forward_stages": carried,
        "deployment_weight": [float(w) for w in schedule.deployment_weight],
        "stage_reports": [r.to_dict() if r is not None else None
                          for r in schedule.solve_reports],
        "metrics": traded.to_dict() if traded is not None else None,
    }
    _write_json(cfg["out"], "online.json", payload)
    click.echo(f"online: stages={schedule.n_stages}"
               f" carried_forward={len(carried)}"
               f" deployment_weight={[float(w) for w in schedule.deployment_weight]}")
    if traded is not None:
        click.echo(f"traded stages: cumulative_return={_fmt(payload['metrics']['cumulative_return'])}"
                   f" log_growth={_fmt(payload['metrics']['log_growth'])}")


@main.command()
@_common_options
@_cli_errors
def analyze(config_path, **overrides):
    """Report block moments, dominance, and survival diagnostics."""
    cfg = _resolve(config_path, **overrides)
    market = _load_market(cfg)
    mom = moments(market.cp)
    out = cfg["out"]

    payload = {"assets": list(market.assets), "n": market.cp.n}
    payload.update(mom.to_dict())
    _write_json(out, "moments.json", payload)

    dom = _dominance_payload(market.cp)
    _write_json(out, "dominance.json", dom)
    click.echo(f"dominance: dominant_assets={dom['dominant_assets']}")

    equal = np.full(market.cp.n_assets, 1.0 / market.cp.n_assets)
    survival = _survival_payload(market, market.cp.n, equal)
    _write_json(out, "survival.json", survival)
    click.echo(f"survival: sufficient_ok={survival['sufficient_ok']}"
               f" necessary_ok={survival['necessary_ok']}")
    frac = taylor_violation_fraction(market.cp, equal)
    click.echo(f"taylor_violation_fraction={repr(frac)} at equal weight")


if __name__ == "__main__":
    main()
