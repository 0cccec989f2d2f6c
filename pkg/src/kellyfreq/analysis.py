"""Dominance screening, survival bounds, feasible-region clouds, two-fund checks."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConfigError,
    EmptyPanel,
    InputNotOptimal,
    NonPositiveGross,
    ZeroCost,
)
from .market_data import CompoundPanel, as_cost_array
from .objective import MomentPair, SimplexWeight
from .solver import (
    ACTIVITY_TOL,
    SolveStatus,
    SolverConfig,
    kkt_residual,
    solve_exact,
)
from .validation import as_float_vector, check_weight_vector, readonly


@dataclass(frozen=True)
class DominanceReport:
    """Pairwise expected gross-return ratios and the assets they crown.

    ``ratios[i, j]`` is the sample mean of (1 + x_i) / (1 + x_j) over
    fee-adjusted blocks. Asset j is dominant when every entry of column j
    is at most 1 + tol; holding a dominant asset alone is growth-optimal.
    """

    dominant_assets: tuple
    ratios: np.ndarray
    tol: float

    def __post_init__(self):
        object.__setattr__(self, "ratios", readonly(self.ratios))

    def to_dict(self) -> dict:
        return {
            "dominant_assets": list(self.dominant_assets),
            "ratios": self.ratios.tolist(),
            "tol": self.tol,
        }


def dominance_check(cp: CompoundPanel, tol: float = 1e-9) -> DominanceReport:
    """Screen for assets whose solo holding dominates every rival."""
    R = 1.0 + cp.fee_adjusted
    if np.any(R <= 0.0):
        raise NonPositiveGross("dominance ratios need positive fee-adjusted gross returns")
    ratios = (R[:, :, None] / R[:, None, :]).mean(axis=0)
    dominant = tuple(
        int(j) for j in range(cp.n_assets) if np.all(ratios[:, j] <= 1.0 + tol)
    )
    return DominanceReport(dominant, ratios, tol)


@dataclass(frozen=True)
class SurvivalReport:
    """Bundle of the three ruin diagnostics for one configuration."""

    sufficient_ok: tuple
    necessary_ok: bool | None
    mc_bankruptcy_rate: float | None

    def to_dict(self) -> dict:
        return {
            "sufficient_ok": [bool(v) for v in self.sufficient_ok],
            "necessary_ok": self.necessary_ok,
            "mc_bankruptcy_rate": self.mc_bankruptcy_rate,
        }


def survival_sufficient(x_min, costs, n: int) -> np.ndarray:
    """Per-asset no-ruin check: worst per-period return above c_i^(1/n) - 1.

    When every flag is True, any simplex weight keeps the account strictly
    positive over an n-period block regardless of the return path.
    """
    x_min = as_float_vector(x_min, "x_min")
    c = as_cost_array(costs, x_min.shape[0])
    if n < 1:
        raise ConfigError(f"period n must be >= 1, got {n}")
    thresholds = np.power(c, 1.0 / n) - 1.0
    return x_min > thresholds


def survival_necessary(mu, costs, n: int, K) -> bool:
    """Necessary condition for sure survival under strictly positive costs.

    If the account stays positive with probability one, then
    sum_i K_i ((1 + mu_i)^n - c_i) >= 0 must hold for the per-period mean
    returns mu. A False result certifies that sure survival is impossible.
    """
    mu = as_float_vector(mu, "mu")
    c = as_cost_array(costs, mu.shape[0])
    if np.any(c <= 0.0):
        raise ZeroCost("the necessary condition requires strictly positive costs")
    if n < 1:
        raise ConfigError(f"period n must be >= 1, got {n}")
    K = check_weight_vector(K, mu.shape[0])
    return bool(K @ ((1.0 + mu) ** n - c) >= 0.0)


def survival_monte_carlo(sampler, K, n: int, costs, trials: int = 100_000,
                         seed: int = 0) -> float:
    """Simulated ruin frequency for weight K over n-period blocks.

    ``sampler(rng, size)`` must return a (size, n, m) array of per-period
    simple returns. Trials are split into deterministic seed streams so
    the estimate is reproducible (and chunk evaluation stays vectorised).
    """
    K = check_weight_vector(K)
    m = K.shape[0]
    c = as_cost_array(costs, m)
    if trials < 1:
        raise ConfigError("trials must be positive")
    if n < 1:
        raise ConfigError(f"period n must be >= 1, got {n}")
    chunk = 65_536
    streams = np.random.SeedSequence(seed).spawn((trials + chunk - 1) // chunk)
    ruined = 0
    done = 0
    for ss in streams:
        size = min(chunk, trials - done)
        rng = np.random.default_rng(ss)
        paths = np.asarray(sampler(rng, size), dtype=float)
        if paths.shape != (size, n, m):
            raise ConfigError(
                f"sampler returned shape {paths.shape}, expected {(size, n, m)}"
            )
        raw = np.prod(1.0 + paths, axis=1) - 1.0
        gross = 1.0 + (raw - c) @ K
        ruined += int(np.count_nonzero(gross <= 0.0))
        done += size
    return ruined / trials


@dataclass(frozen=True)
class FrontierPoint:
    """One weight's position in the (log-variance, growth) plane."""

    weight: SimplexWeight
    elg: float
    log_variance: float
    on_frontier: bool = False


def frontier(cp: CompoundPanel, samples: int = 512, seed: int = 0,
             bins: int = 20, cfg: SolverConfig | None = None) -> list:
    """Sample the feasible region of (log-variance, per-period growth).

    Evaluates every vertex, Dirichlet(1,...,1)-sampled interior weights,
    and the exact solver's optimum. Weights violating the log domain on
    some block are skipped. Within each of ``bins`` equal-width
    log-variance bins the highest-growth point is flagged ``on_frontier``,
    tracing the empirical upper boundary.
    """
    if cp.n_blocks < 1:
        raise EmptyPanel("frontier needs at least one block")
    if samples < 0 or bins < 1:
        raise ConfigError("samples must be >= 0 and bins >= 1")
    m = cp.n_assets
    rng = np.random.default_rng(seed)
    weights = [np.eye(m)[i] for i in range(m)]
    if m > 1 and samples:
        weights.extend(rng.dirichlet(np.ones(m), size=samples))
    report = solve_exact(cp, cfg)
    if report.status is not SolveStatus.INFEASIBLE_EXACT:
        opt = np.asarray(report.weight)
        if not any(np.array_equal(opt, w) for w in weights):
            weights.append(opt)

    X = cp.fee_adjusted
    evaluated = []
    for K in weights:
        gross = 1.0 + X @ K
        if np.any(gross <= 0.0):
            continue
        logs = np.log(gross)
        evaluated.append((K, float(logs.mean() / cp.n), float(logs.var())))
    if not evaluated:
        return []

    variances = np.array([v for _, _, v in evaluated])
    lo, hi = float(variances.min()), float(variances.max())
    width = (hi - lo) / bins
    if width <= 0.0:
        bin_of = np.zeros(len(evaluated), dtype=int)
    else:
        bin_of = np.minimum(((variances - lo) / width).astype(int), bins - 1)
    best_in_bin: dict = {}
    for idx, (_, elg, _) in enumerate(evaluated):
        b = int(bin_of[idx])
        if b not in best_in_bin or elg > evaluated[best_in_bin[b]][1]:
            best_in_bin[b] = idx
    frontier_idx = set(best_in_bin.values())
    return [
        FrontierPoint(SimplexWeight(K), elg, var, idx in frontier_idx)
        for idx, (K, elg, var) in enumerate(evaluated)
    ]


def write_frontier_csv(points, assets, path) -> None:
    """Export frontier points as ``elg,log_variance,on_frontier,w_<asset>...``."""
    assets = list(assets)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["elg", "log_variance", "on_frontier"] + [f"w_{a}" for a in assets])
        for p in points:
            writer.writerow(
                [repr(p.elg), repr(p.log_variance), int(p.on_frontier)]
                + [repr(w) for w in p.weight.tolist()]
            )


def two_fund_check(mom: MomentPair, K1, K2, alphas, tol: float = 1e-8,
                   activity_tol: float = ACTIVITY_TOL) -> np.ndarray:
    """Optimality residuals along the segment between two optimal weights.

    Both endpoints must already satisfy the surrogate optimality
    conditions within ``tol`` (otherwise InputNotOptimal). Returns the
    kkt_residual at alpha*K1 + (1-alpha)*K2 for each alpha; a concave
    quadratic objective keeps every convex combination optimal, so the
    residuals should stay at certificate level.
    """
    K1 = check_weight_vector(K1, mom.n_assets, "K1")
    K2 = check_weight_vector(K2, mom.n_assets, "K2")
    alphas = as_float_vector(alphas, "alphas")
    if np.any(alphas < 0.0) or np.any(alphas > 1.0):
        raise ConfigError("alphas must lie in [0, 1]")
    for name, K in (("K1", K1), ("K2", K2)):
        res = kkt_residual(mom, K, activity_tol)
        if res > tol:
            raise InputNotOptimal(f"{name} has optimality residual {res:.3e} > {tol:.3e}")
    return np.array(
        [kkt_residual(mom, a * K1 + (1.0 - a) * K2, activity_tol) for a in alphas]
    )
