"""Scikit-learn style estimators wrapping the growth-optimal machinery.

Both estimators follow the usual conventions: ``__init__`` stores
hyperparameters untouched, ``fit`` validates input and exposes fitted
state through trailing-underscore attributes, and ``get_params`` /
``set_params`` come from ``BaseEstimator`` so the classes compose with
pipelines, grid search, and ``clone``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import DataError
from .market_data import ReturnPanel, as_cost_array, compound
from .objective import exact_elg, moments
from .online import OnlineConfig, online_backtest, run_online
from .solver import SolveStatus, SolverConfig, solve_approx, solve_exact
from .validation import check_returns_matrix


def _panel_from_array(X, riskless_index):
    X = check_returns_matrix(X, "X")
    if X.shape[1] < 2:
        raise DataError("need at least two asset columns")
    assets = tuple(f"asset_{i}" for i in range(X.shape[1]))
    return ReturnPanel(assets, X, riskless_index)


class KellyPortfolio(BaseEstimator):
    """Growth-optimal portfolio weights under proportional trading costs.

    Fitting compounds the per-period return matrix into ``n``-period
    blocks, subtracts per-rebalance costs, and maximises the chosen
    expected log-growth objective over the unit simplex.

    Parameters
    ----------
    n : int, default=1
        Rebalancing period, in data periods per block.
    costs : float or array-like, default=0.0
        Proportional cost per asset, charged on the full allocation at
        every rebalance. A scalar is broadcast to all assets.
    mode : {"exact", "approx"}, default="exact"
        Maximise the exact log objective or its quadratic surrogate.
    block_mode : {"nonoverlap", "overlap"}, default="nonoverlap"
        How blocks are cut from the panel.
    riskless_index : int or None, default=None
        Column holding a constant riskless rate, if any.
    kkt_tol : float, default=1e-8
        Optimality-certificate tolerance for the solver.
    max_iters : int, default=2000
        Gradient-ascent iteration cap.

    Attributes
    ----------
    weights_ : ndarray of shape (n_assets,)
        The optimal simplex weight vector.
    report_ : SolveReport
        Full solve outcome (objective, certificate residual, status).
    moments_ : MomentPair
        Sample moments of the fee-adjusted blocks.
    n_assets_ : int
    n_features_in_ : int

    Examples
    --------
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> X = np.column_stack([np.zeros(200), rng.choice([-0.5, 0.5], 200)])
    >>> KellyPortfolio(costs=0.01).fit(X).weights_.shape
    (2,)
    """

    def __init__(self, n=1, costs=0.0, mode="exact", block_mode="nonoverlap",
                 riskless_index=None, kkt_tol=1e-8, max_iters=2000):
        self.n = n
        self.costs = costs
        self.mode = mode
        self.block_mode = block_mode
        self.riskless_index = riskless_index
        self.kkt_tol = kkt_tol
        self.max_iters = max_iters

    def _solver_config(self):
        return SolverConfig(max_iters=self.max_iters, kkt_tol=self.kkt_tol)

    def _compound(self, X):
        panel = _panel_from_array(X, self.riskless_index)
        costs = as_cost_array(self.costs, panel.n_assets)
        return compound(panel, self.n, costs, self.block_mode)

    def fit(self, X, y=None):
        """Solve for the growth-optimal weights on a (periods, assets) matrix."""
        if self.mode not in ("exact", "approx"):
            raise DataError(f"mode must be 'exact' or 'approx', got {self.mode!r}")
        cp = self._compound(X)
        mom = moments(cp)
        if self.mode == "exact":
            report = solve_exact(cp, self._solver_config())
        else:
            report = solve_approx(mom, self.n, self._solver_config())
        if report.status is SolveStatus.INFEASIBLE_EXACT:
            raise DataError(
                "exact objective is unbounded below on every single asset; "
                "every asset loses everything in some block (try mode='approx')"
            )
        self.n_features_in_ = cp.n_assets
        self.n_assets_ = cp.n_assets
        self.weights_ = np.asarray(report.weight)
        self.report_ = report
        self.moments_ = mom
        return self

    def transform(self, X):
        """Per-block fee-adjusted portfolio returns under the fitted weights.

        Returns a column vector with one row per block, suitable as a
        downstream feature or for direct inspection.
        """
        check_is_fitted(self, "weights_")
        cp = self._compound(X)
        if cp.n_assets != self.n_assets_:
            raise DataError(f"X has {cp.n_assets} assets, was fitted with {self.n_assets_}")
        return (cp.fee_adjusted @ self.weights_)[:, None]

    def score(self, X, y=None):
        """Realised per-period log growth of the fitted weights on X.

        -inf when some block would wipe out the account.
        """
        check_is_fitted(self, "weights_")
        cp = self._compound(X)
        if cp.n_assets != self.n_assets_:
            raise DataError(f"X has {cp.n_assets} assets, was fitted with {self.n_assets_}")
        return exact_elg(cp, self.weights_).value


class SlidingWindowKelly(BaseEstimator):
    """Walk-forward growth-optimal trading over a sliding block window.

    ``fit`` rolls the solver across the panel: the weight applied at each
    stage is estimated on the preceding ``window`` blocks only, with a
    riskless (or user-chosen) warm-up before enough blocks exist.

    Parameters mirror :class:`KellyPortfolio` plus ``window`` (blocks per
    estimation window) and ``warmup_weight``.

    Attributes
    ----------
    schedule_ : WeightSchedule
        Stage-indexed weights with their solve reports.
    weights_ : ndarray of shape (n_assets,)
        Deployment weight solved on the final window, ready for the next
        unseen block.
    backtest_report_ : BacktestReport
        Account simulation of the schedule on the fitted panel.
    """

    def __init__(self, window=10, n=1, costs=0.0, mode="approx",
                 riskless_index=None, warmup_weight=None, kkt_tol=1e-8,
                 max_iters=2000, r_f=0.0):
        self.window = window
        self.n = n
        self.costs = costs
        self.mode = mode
        self.riskless_index = riskless_index
        self.warmup_weight = warmup_weight
        self.kkt_tol = kkt_tol
        self.max_iters = max_iters
        self.r_f = r_f

    def _online_config(self):
        return OnlineConfig(
            window=self.window,
            n=self.n,
            problem=self.mode,
            costs=self.costs,
            solver=SolverConfig(max_iters=self.max_iters, kkt_tol=self.kkt_tol),
            warmup_weight=self.warmup_weight,
            r_f=self.r_f,
        )

    def fit(self, X, y=None):
        panel = _panel_from_array(X, self.riskless_index)
        cfg = self._online_config()
        schedule = run_online(panel, cfg)
        self.n_features_in_ = panel.n_assets
        self.n_assets_ = panel.n_assets
        self.schedule_ = schedule
        self.weights_ = np.array(schedule.deployment_weight)
        self.backtest_report_ = online_backtest(panel, cfg, schedule)
        return self

    def score(self, X, y=None):
        """Per-period realised log growth of a fresh walk-forward run on X."""
        check_is_fitted(self, "schedule_")
        panel = _panel_from_array(X, self.riskless_index)
        report = online_backtest(panel, self._online_config())
        return report.log_growth / max(report.n_periods, 1)
