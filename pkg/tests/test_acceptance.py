"""Acceptance gate: one test per release criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Every criterion asserts at its stated tolerance; a red test here
means the build does not meet its contract.
"""

import contextlib
import functools
import math
import time

import numpy as np
import pytest

from kellyfreq import (
    BacktestConfig,
    BuyAndHold,
    CompoundPanel,
    FixedWeight,
    OnlineConfig,
    ReturnPanel,
    approximation_gap_bound,
    approx_gradient,
    approx_elg,
    compute_metrics,
    dominance_check,
    exact_elg,
    exact_gradient,
    kkt_residual,
    moments,
    run_backtest,
    run_online,
    solve_approx,
    solve_exact,
    survival_monte_carlo,
    survival_necessary,
    survival_sufficient,
)
from kellyfreq.solver import ApproxProblem, ExactProblem, grid_oracle

from helpers import (
    approx_k2_n1,
    approx_k2_n2,
    binomial_compound,
    exact_k2_n1,
    random_blocks,
    random_panel,
)


@contextlib.contextmanager
def criterion(num, desc):
    try:
        yield
    except BaseException:
        print(f"[criterion {num:02d}] FAIL {desc}")
        raise
    print(f"[criterion {num:02d}] PASS {desc}")


@functools.lru_cache(maxsize=1)
def _closed_form_runs_n1():
    """Criterion 1 solves; also feeds the certificate sweep (criterion 4)."""
    t0 = time.perf_counter()
    rows = []
    certificates = []
    for p in (0.55, 0.6, 0.65, 0.7):
        for c2 in (0.0, 0.01, 0.05):
            cp = binomial_compound(p, n=1, c2=c2)
            mom = moments(cp)
            report = solve_approx(mom, 1)
            k_hat = float(np.asarray(report.weight)[1])
            certificates.append((mom, np.asarray(report.weight)))
            k_exact = None
            if c2 == 0.0:
                k_exact = float(np.asarray(solve_exact(cp).weight)[1])
            rows.append((p, c2, k_hat, k_exact))
    saturated = []
    for p in (0.75, 0.8, 0.9):
        cp = binomial_compound(p, n=1, c2=0.0)
        saturated.append((p, float(np.asarray(solve_exact(cp).weight)[1])))
    return rows, saturated, certificates, time.perf_counter() - t0


@functools.lru_cache(maxsize=1)
def _closed_form_runs_n2():
    """Criterion 2 solves; also feeds the certificate sweep (criterion 4)."""
    t0 = time.perf_counter()
    rows = []
    certificates = []
    for p in (0.55, 0.6, 0.7):
        mom = moments(binomial_compound(p, n=2, c2=0.0))
        report = solve_approx(mom, 2)
        certificates.append((mom, np.asarray(report.weight)))
        rows.append((p, float(np.asarray(report.weight)[1])))
    saturated = []
    for p in (0.75, 0.8):
        cp = binomial_compound(p, n=2, c2=0.0)
        saturated.append((p, float(np.asarray(solve_exact(cp).weight)[1])))
    return rows, saturated, certificates, time.perf_counter() - t0


@functools.lru_cache(maxsize=1)
def _grid_oracle_runs():
    """Criterion 3 solves; also feeds the certificate sweep (criterion 4)."""
    t0 = time.perf_counter()
    diffs = []
    certificates = []
    for seed in range(50):
        m = 2 + seed % 2
        cp = random_blocks(seed, S=40, m=m, scale=0.3)
        mom = moments(cp)
        approx_report = solve_approx(mom, 1)
        exact_report = solve_exact(cp)
        certificates.append((mom, np.asarray(approx_report.weight)))
        oracle_approx = grid_oracle(ApproxProblem(mom, 1), 0.01)
        oracle_exact = grid_oracle(ExactProblem(cp), 0.01)
        diffs.append((
            abs(approx_report.objective.value - oracle_approx.objective.value),
            abs(exact_report.objective.value - oracle_exact.objective.value),
        ))
    return diffs, certificates, time.perf_counter() - t0


def test_criterion_1_two_point_closed_forms_n1():
    with criterion(1, "n=1 two-point closed forms (approx 1e-3, exact 1e-3, "
                      "saturation 1e-6, < 1 s)"):
        rows, saturated, _, elapsed = _closed_form_runs_n1()
        for p, c2, k_hat, k_exact in rows:
            assert k_hat == pytest.approx(approx_k2_n1(p, c2), abs=1e-3)
            if k_exact is not None:
                assert k_exact == pytest.approx(exact_k2_n1(p), abs=1e-3)
        for p, k in saturated:
            assert k == pytest.approx(1.0, abs=1e-6)
        assert elapsed < 1.0


def test_criterion_2_two_point_closed_form_n2():
    with criterion(2, "n=2 two-point closed form (approx 1e-3, saturation "
                      "at p>=3/4, < 1 s)"):
        rows, saturated, _, elapsed = _closed_form_runs_n2()
        for p, k_hat in rows:
            assert k_hat == pytest.approx(approx_k2_n2(p), abs=1e-3)
        for p, k in saturated:
            assert k == pytest.approx(1.0, abs=1e-6)
        assert elapsed < 1.0


def test_criterion_3_grid_oracle_equivalence():
    with criterion(3, "solver matches 0.01-step grid oracle within 1e-4 on "
                      "50 panels, both problems, < 30 s"):
        diffs, _, elapsed = _grid_oracle_runs()
        assert len(diffs) == 50
        for d_approx, d_exact in diffs:
            assert d_approx <= 1e-4
            assert d_exact <= 1e-4
        assert elapsed < 30.0


def test_criterion_4_optimality_certificate():
    with criterion(4, "certificate <= 1e-8 at each solve, > 1e-3 at 100 "
                      "non-optimal interior points"):
        certificates = (_closed_form_runs_n1()[2]
                        + _closed_form_runs_n2()[2]
                        + _grid_oracle_runs()[1])
        assert len(certificates) == 12 + 3 + 50
        for mom, K in certificates:
            assert kkt_residual(mom, K) <= 1e-8

        rng = np.random.default_rng(404)
        checked = 0
        for seed in range(10):
            cp = random_blocks(1000 + seed, S=60, m=3, scale=0.3)
            mom = moments(cp)
            K_hat = np.asarray(solve_approx(mom, 1).weight)
            points = 0
            while points < 10:
                K = rng.dirichlet(np.ones(3))
                if K.min() < 0.02 or np.abs(K - K_hat).max() < 0.1:
                    continue
                assert kkt_residual(mom, K) > 1e-3
                points += 1
                checked += 1
        assert checked == 100


def test_criterion_5_two_fund_property():
    with criterion(5, "convex combinations of twin optima stay certified "
                      "<= 1e-8 on 20 duplicated-column panels"):
        rng = np.random.default_rng(505)
        for trial in range(20):
            base = random_blocks(500 + trial, S=50, m=2, scale=0.25)
            risky = base.raw[:, 1] + 0.08
            raw = np.column_stack([base.raw[:, 0], risky, risky])
            cp = CompoundPanel.from_blocks(raw, 0.0, n=1, assets=("A", "B", "C"))
            mom = moments(cp)
            report = solve_approx(mom, 1)
            assert report.kkt_residual <= 1e-8
            K = np.asarray(report.weight)
            mass = K[1] + K[2]
            assert mass > 0.0
            K1 = np.array([K[0], mass, 0.0])
            K2 = np.array([K[0], 0.0, mass])
            assert kkt_residual(mom, K1) <= 1e-8
            assert kkt_residual(mom, K2) <= 1e-8
            for alpha in rng.uniform(0.0, 1.0, size=100):
                assert kkt_residual(mom, alpha * K1 + (1 - alpha) * K2) <= 1e-8


def test_criterion_6_dominant_vertex_is_optimal():
    with criterion(6, "solve_exact value equals the dominant vertex value "
                      "within 1e-6 on 20 constructed panels"):
        for trial in range(20):
            rng = np.random.default_rng(600 + trial)
            S = 40
            m = 2 + trial % 3
            j = trial % m
            base = rng.uniform(0.7, 1.4, size=S)
            R = np.empty((S, m))
            for i in range(m):
                if i == j:
                    R[:, i] = base
                else:
                    g = rng.uniform(0.5, 1.5, size=S)
                    # normalising by the sample mean pins E[R_i/R_j] at 0.95
                    R[:, i] = base * (g / g.mean()) * 0.95
            cp = CompoundPanel.from_blocks(R - 1.0, 0.0, n=1,
                                           assets=tuple("ABCD"[:m]))
            report = dominance_check(cp)
            assert j in report.dominant_assets
            assert np.all(report.ratios[:, j] <= 1.0 + 1e-12)
            vertex = np.zeros(m)
            vertex[j] = 1.0
            solved = solve_exact(cp)
            assert solved.objective.value == pytest.approx(
                exact_elg(cp, vertex).value, abs=1e-6)


def test_criterion_7_survival_conditions():
    with criterion(7, "safe sampler never ruins in 1e5 trials; violating "
                      "sampler does; necessity counterexample is False"):
        n = 2
        costs = np.array([0.04, 0.04])
        assert np.all(survival_sufficient([-0.5, -0.5], costs, n))

        def safe(rng, size):
            return rng.uniform(-0.5, 0.5, size=(size, n, 2))

        rate = survival_monte_carlo(safe, [0.5, 0.5], n, costs,
                                    trials=100_000, seed=11)
        assert rate == 0.0

        def crashing(rng, size):
            x = rng.uniform(-0.5, 0.5, size=(size, n, 2))
            x[rng.random(size) < 0.05] = -0.95
            return x

        assert not np.all(survival_sufficient([-0.95, -0.95], costs, n))
        rate = survival_monte_carlo(crashing, [0.5, 0.5], n, costs,
                                    trials=100_000, seed=12)
        assert rate > 0.0

        assert survival_necessary([-0.6], [0.5], 1, [1.0]) is False


def test_criterion_8_approximation_gap():
    with criterion(8, "0 <= gap <= bound and weights within 0.05 on 20 "
                      "small-return panels"):
        for trial in range(20):
            cp = random_blocks(800 + trial, S=60, m=2 + trial % 2, scale=0.02)
            mom = moments(cp)
            K_hat = np.asarray(solve_approx(mom, 1).weight)
            K_star = np.asarray(solve_exact(cp).weight)
            gap = exact_elg(cp, K_star).value - exact_elg(cp, K_hat).value
            bound = approximation_gap_bound(cp, K_star, K_hat)
            assert gap >= -1e-12
            assert gap <= bound + 1e-12
            assert np.abs(K_star - K_hat).max() <= 0.05


def test_criterion_9_gradient_checks():
    with criterion(9, "analytic gradients match central differences "
                      "(h=1e-6) within 1e-6 relative at 100 interior points"):
        h = 1e-6
        checked = 0
        for seed in range(10):
            m = 2 + seed % 3
            cp = random_blocks(900 + seed, S=50, m=m, scale=0.25)
            mom = moments(cp)
            rng = np.random.default_rng(seed)
            for _ in range(10):
                K = rng.dirichlet(np.ones(m)) * (1 - 0.01 * m) + 0.01
                g_exact = exact_gradient(cp, K)
                g_approx = approx_gradient(mom, cp.n, K)
                for i in range(m):
                    e = np.zeros(m)
                    e[i] = h
                    fd = (exact_elg(cp, K + e).value
                          - exact_elg(cp, K - e).value) / (2 * h)
                    assert g_exact[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)
                    fd = (approx_elg(mom, cp.n, K + e).value
                          - approx_elg(mom, cp.n, K - e).value) / (2 * h)
                    assert g_approx[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)
                checked += 1
        assert checked == 100


def test_criterion_10_backtest_fixtures():
    with criterion(10, "cost recursion and drawdown fixtures exact; "
                       "exp(log_growth) == 1 + cumulative_return to 1e-12"):
        panel = ReturnPanel(("A", "B"),
                            np.column_stack([[0.2, -0.25], [0.0, 0.0]]))
        fixture = run_backtest(panel, BacktestConfig(
            n=1, costs=[0.1, 0.0], strategy=FixedWeight([1.0, 0.0])))
        np.testing.assert_allclose(fixture.trajectory, [1.0, 1.1, 0.715],
                                   rtol=0, atol=1e-15)

        assert compute_metrics([1.0, 1.2, 0.9, 1.1]).max_drawdown \
            == pytest.approx(0.25, abs=1e-15)

        reports = [fixture]
        for seed in range(5):
            panel = random_panel(300 + seed, T=24, m=3, scale=0.2)
            for strategy in (BuyAndHold(), FixedWeight([0.2, 0.3, 0.5])):
                reports.append(run_backtest(panel, BacktestConfig(
                    n=2, costs=0.005, strategy=strategy)))
        crash = ReturnPanel(("A", "B"),
                            np.column_stack([[-0.95, 0.5], [0.0, 0.0]]))
        reports.append(run_backtest(crash, BacktestConfig(
            n=1, costs=[0.1, 0.0], strategy=FixedWeight([1.0, 0.0]))))
        assert reports[-1].bankrupt
        for report in reports:
            assert math.exp(report.log_growth) == pytest.approx(
                1.0 + report.cumulative_return, abs=1e-12)


def test_criterion_11_online_no_look_ahead():
    with criterion(11, "post-window mutations leave earlier weights "
                       "byte-identical; regime switch adapts within M blocks"):

        def panel_of(returns):
            r = np.asarray(returns, dtype=float)
            X = np.column_stack([r, np.zeros_like(r)])
            return ReturnPanel(("COIN", "BANK"), X, riskless_index=1)

        rng = np.random.default_rng(1111)
        base = rng.uniform(-0.2, 0.3, size=24)
        cfg = OnlineConfig(window=6, n=1)
        before = run_online(panel_of(base), cfg)
        for cut in (10, 15, 20):
            mutated = base.copy()
            mutated[cut:] = rng.uniform(-0.2, 0.3, size=24 - cut)
            after = run_online(panel_of(mutated), cfg)
            assert (before.weights[:cut + 1].tobytes()
                    == after.weights[:cut + 1].tobytes())

        M = 5
        up = rng.uniform(0.05, 0.25, size=30)
        down = rng.uniform(-0.25, -0.05, size=30)
        schedule = run_online(panel_of(np.concatenate([up, down])),
                              OnlineConfig(window=M, n=1))
        assert schedule.weights[30, 0] > 0.9
        assert schedule.weights[30 + M, 0] < 0.1
