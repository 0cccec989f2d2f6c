"""Simplex-constrained maximisation of the growth objectives.

The workhorse is projected gradient ascent with an Armijo backtracking
line search, safeguarded so that exact-objective iterates never leave the
log domain. A first-order stationarity certificate provides the stopping
rule and is reported with every solve: writing b for the (unscaled)
gradient and lam = K'b, an optimal K on the unit simplex satisfies

    b_i = lam  wherever K_i > 0,      b_i <= lam  wherever K_i = 0,

and ``kkt_residual`` measures the largest violation of those conditions.
After the gradient phase an active-set refinement (a linear solve on the
identified face for the quadratic surrogate, a guarded Newton iteration
for the exact objective) pushes the certificate to solver tolerance.

``grid_oracle`` exhaustively scores a simplex lattice and exists purely as
an independent cross-check for tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import ConfigError, LatticeTooLarge
from .market_data import CompoundPanel
from .objective import MomentPair, ObjectiveValue, SimplexWeight
from .validation import check_weight_vector

ACTIVITY_TOL = 1e-9
MAX_LATTICE_POINTS = 10_000_000


class SolveStatus(str, Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    INFEASIBLE_EXACT = "InfeasibleExact"


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the projected gradient solver and the grid oracle."""

    max_iters: int = 2000
    kkt_tol: float = 1e-8
    step_init: float = 1.0
    armijo_c: float = 1e-4
    grid_step: float = 0.01

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if not 0.0 < self.kkt_tol < 1.0:
            raise ConfigError("kkt_tol must lie in (0, 1)")
        if self.step_init <= 0.0:
            raise ConfigError("step_init must be positive")
        if not 0.0 < self.armijo_c < 1.0:
            raise ConfigError("armijo_c must lie in (0, 1)")
        if not 0.0 < self.grid_step <= 1.0:
            raise ConfigError("grid_step must lie in (0, 1]")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one simplex solve.

    ``objective_path`` lists the per-period objective at every accepted
    ascent step (non-decreasing); it is diagnostic only and not part of
    the JSON form.
    """

    weight: SimplexWeight | None
    objective: ObjectiveValue
    kkt_residual: float
    iterations: int
    status: SolveStatus
    objective_path: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "weight": self.weight.tolist() if self.weight is not None else None,
            "objective": _json_float(self.objective.value),
            "kkt_residual": _json_float(self.kkt_residual),
            "iterations": self.iterations,
            "status": self.status.value,
        }


def _json_float(x: float):
    return float(x) if math.isfinite(x) else None


def project_simplex(v) -> SimplexWeight:
    """Euclidean projection of an arbitrary vector onto the unit simplex."""
    v = check_weight_vector(v, name="vector")
    return SimplexWeight(_project(v))


def _project(v: np.ndarray) -> np.ndarray:
    # Sort-and-threshold: find the largest rho with
    # u_rho - (cumsum(u)_rho - 1)/rho > 0, clip at that threshold.
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho_idx = np.arange(1, v.shape[0] + 1)
    positive = u - css / rho_idx > 0.0
    rho = int(np.count_nonzero(positive))
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


class ApproxProblem:
    """Quadratic surrogate in block units: F(K) = K'mu - 0.5 K'M K."""

    kind = "approx"

    def __init__(self, mom: MomentPair, n: int):
        if n < 1:
            raise ConfigError(f"period n must be >= 1, got {n}")
        self.mean = mom.mean
        self.M = mom.second_moment
        self.n = int(n)
        self.m = mom.n_assets

    def value(self, K: np.ndarray) -> float:
        return float(K @ self.mean - 0.5 * K @ self.M @ K)

    def gradient(self, K: np.ndarray) -> np.ndarray:
        return self.mean - self.M @ K

    def value_batch(self, B: np.ndarray) -> np.ndarray:
        return B @ self.mean - 0.5 * np.einsum("ij,jk,ik->i", B, self.M, B)

    def objective_value(self, K: np.ndarray) -> ObjectiveValue:
        return ObjectiveValue(self.value(K) / self.n, True, 0)


class ExactProblem:
    """Exact objective in block units: F(K) = mean_s log(1 + K'x(s))."""

    kind = "exact"

    def __init__(self, cp: CompoundPanel):
        self.X = cp.fee_adjusted
        self.n = cp.n
        self.m = cp.n_assets

    def value(self, K: np.ndarray) -> float:
        gross = 1.0 + self.X @ K
        if np.any(gross <= 0.0):
            return float("-inf")
        return float(np.log(gross).mean())

    def gradient(self, K: np.ndarray) -> np.ndarray:
        gross = 1.0 + self.X @ K
        return (self.X / gross[:, None]).mean(axis=0)

    def value_batch(self, B: np.ndarray) -> np.ndarray:
        gross = 1.0 + B @ self.X.T
        bad = np.any(gross <= 0.0, axis=1)
        out = np.full(B.shape[0], float("-inf"))
        ok = ~bad
        if np.any(ok):
            out[ok] = np.log(gross[ok]).mean(axis=1)
        return out

    def violations(self, K: np.ndarray) -> int:
        return int(np.count_nonzero(1.0 + self.X @ K <= 0.0))

    def objective_value(self, K: np.ndarray) -> ObjectiveValue:
        v = self.value(K)
        if math.isfinite(v):
            return ObjectiveValue(v / self.n, True, 0)
        return ObjectiveValue(float("-inf"), False, self.violations(K))


def _stationarity_residual(g: np.ndarray, K: np.ndarray,
                           activity_tol: float = ACTIVITY_TOL) -> float:
    lam = float(K @ g)
    active = K > activity_tol
    res = 0.0
    if np.any(active):
        res = float(np.abs(g[active] - lam).max())
    if not np.all(active):
        res = max(res, float(max(0.0, (g[~active] - lam).max())))
    return res


def kkt_residual(mom: MomentPair, K, activity_tol: float = ACTIVITY_TOL) -> float:
    """Largest violation of the simplex optimality conditions for the surrogate.

    With b = mu - M K and lam = K'b, the conditions require b_i = lam on
    the active set (K_i > activity_tol) and b_i <= lam elsewhere. Zero at
    every maximiser of the quadratic surrogate over the simplex.
    """
    K = check_weight_vector(K, mom.n_assets)
    b = mom.mean - mom.second_moment @ K
    return _stationarity_residual(b, K, activity_tol)


def exact_kkt_residual(cp: CompoundPanel, K, activity_tol: float = ACTIVITY_TOL) -> float:
    """Same first-order certificate for the exact objective (block units)."""
    K = check_weight_vector(K, cp.n_assets)
    problem = ExactProblem(cp)
    if not math.isfinite(problem.value(K)):
        return float("inf")
    return _stationarity_residual(problem.gradient(K), K, activity_tol)


def _pg_maximize(problem, K0: np.ndarray, cfg: SolverConfig):
    """Projected gradient ascent with Armijo backtracking. Returns
    (K, value, path, iterations, converged)."""
    K = np.array(K0, dtype=float)
    f = problem.value(K)
    path = [f]
    t = cfg.step_init
    iterations = 0
    for it in range(cfg.max_iters):
        iterations = it + 1
        g = problem.gradient(K)
        if _stationarity_residual(g, K) <= cfg.kkt_tol:
            return K, f, path, iterations, True
        t = min(t * 2.0, 1e12)
        accepted = False
        f_new = f
        K_new = K
        while t >= 1e-18:
            K_new = _project(K + t * g)
            d = K_new - K
            dg = float(g @ d)
            if dg <= 0.0:
                break  # projection made no ascent progress: stationary
            f_new = problem.value(K_new)
            if math.isfinite(f_new) and f_new >= f + cfg.armijo_c * dg:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        K, f = K_new, f_new
        path.append(f)
    return K, f, path, iterations, False


def _qp_face_solve(mean: np.ndarray, M: np.ndarray, active: list):
    """Stationary point of the surrogate on the face sum(K_A)=1, K off A zero.

    Returns (K_A, consistent). Uses a least-squares solve so rank-deficient
    faces (duplicated assets) pick the minimum-norm representative.
    """
    k = len(active)
    A = np.zeros((k + 1, k + 1))
    A[:k, :k] = M[np.ix_(active, active)]
    A[:k, k] = 1.0
    A[k, :k] = 1.0
    rhs = np.concatenate([mean[active], [1.0]])
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    tol = 1e-8 * max(1.0, float(np.abs(rhs).max()))
    consistent = bool(np.abs(A @ sol - rhs).max() <= tol)
    return sol[:k], consistent


def _qp_active_set(mean: np.ndarray, M: np.ndarray, K0: np.ndarray,
                   kkt_tol: float):
    """Primal active-set refinement for the surrogate. None on failure."""
    m = mean.shape[0]
    active = [int(i) for i in np.flatnonzero(K0 > ACTIVITY_TOL)]
    if not active:
        active = [int(np.argmax(mean))]
    add_tol = min(1e-10, 0.1 * kkt_tol)
    for _ in range(4 * m + 8):
        K_A, consistent = _qp_face_solve(mean, M, active)
        if not consistent:
            return None
        if K_A.min() < -1e-11:
            active.pop(int(np.argmin(K_A)))
            if not active:
                return None
            continue
        K = np.zeros(m)
        K[active] = np.clip(K_A, 0.0, None)
        total = K.sum()
        if total <= 0.0:
            return None
        K /= total
        b = mean - M @ K
        lam = float(K @ b)
        inactive = [i for i in range(m) if i not in active]
        if inactive:
            viol = np.array([b[i] - lam for i in inactive])
            j = int(np.argmax(viol))
            if viol[j] > add_tol:
                active.append(inactive[j])
                continue
        return K
    return None


def _exact_face_newton(problem: ExactProblem, K_start: np.ndarray, active: list,
                       max_newton: int = 60):
    """Equality-constrained Newton ascent on one face of the simplex.

    Maximises the exact objective over {K: K_i = 0 off the face,
    sum K = 1} with the positivity constraint relaxed; callers inspect
    the sign pattern of the result. None if the start is unusable.
    """
    m = problem.m
    idx = np.asarray(active, dtype=int)
    k = idx.shape[0]
    start_mass = K_start[idx].sum()
    if start_mass <= 0.0:
        return None
    K = np.zeros(m)
    K[idx] = K_start[idx] / start_mass
    if k == 1:
        return K
    X = problem.X
    Xa = X[:, idx]
    N = np.vstack([np.eye(k - 1), -np.ones((1, k - 1))])
    for _ in range(max_newton):
        gross = 1.0 + X @ K
        if np.any(gross <= 0.0):
            return None
        w = Xa / gross[:, None]
        g = w.mean(axis=0)
        g_y = N.T @ g
        if np.abs(g_y).max() <= 1e-13:
            break
        H = -(w.T @ w) / Xa.shape[0]
        H_y = N.T @ H @ N
        try:
            dy = np.linalg.solve(H_y, -g_y)
        except np.linalg.LinAlgError:
            dy, *_ = np.linalg.lstsq(H_y, -g_y, rcond=None)
        gd = float(g_y @ dy)
        if gd <= 0.0:
            dy = g_y
            gd = float(g_y @ dy)
        d_full = np.zeros(m)
        d_full[idx] = N @ dy
        f = float(np.log(gross).mean())
        step = 1.0
        K_next = None
        while step >= 1e-16:
            cand = K + step * d_full
            gross_c = 1.0 + X @ cand
            if np.all(gross_c > 0.0):
                f_c = float(np.log(gross_c).mean())
                if f_c >= f + 1e-4 * step * gd:
                    K_next = cand
                    break
            step *= 0.5
        if K_next is None:
            break
        moved = float(np.abs(K_next - K).max())
        K = K_next
        if moved <= 1e-16:
            break
    return K


def _exact_active_set(problem: ExactProblem, K0: np.ndarray, kkt_tol: float):
    """Active-set refinement for the exact objective. None on failure."""
    m = problem.m
    active = [int(i) for i in np.flatnonzero(K0 > ACTIVITY_TOL)]
    if not active:
        active = [int(np.argmax(K0))]
    add_tol = min(1e-10, 0.1 * kkt_tol)
    K_cur = np.array(K0, dtype=float)
    for _ in range(2 * m + 8):
        K = _exact_face_newton(problem, K_cur, active)
        if K is None:
            return None
        face_vals = K[active]
        if face_vals.min() < -1e-11:
            active.pop(int(np.argmin(face_vals)))
            if not active:
                return None
            K_cur = np.clip(K, 0.0, None)
            if K_cur.sum() <= 0.0:
                return None
            continue
        K = np.clip(K, 0.0, None)
        total = K.sum()
        if total <= 0.0:
            return None
        K = K / total
        if not math.isfinite(problem.value(K)):
            return None
        g = problem.gradient(K)
        lam = float(K @ g)
        inactive = [i for i in range(m) if i not in active]
        if inactive:
            viol = np.array([g[i] - lam for i in inactive])
            j = int(np.argmax(viol))
            if viol[j] > add_tol:
                active.append(inactive[j])
                K_cur = K
                continue
        return K
    return None


def _snap_small_coordinates(K: np.ndarray):
    """Zero out sub-threshold coordinates and renormalise, or None."""
    mask = K > ACTIVITY_TOL
    if mask.all() or not mask.any():
        return None
    K2 = np.where(mask, K, 0.0)
    total = K2.sum()
    if total <= 0.0:
        return None
    return K2 / total


def _select_candidate(problem, candidates: list, kkt_tol: float):
    """Pick the best weight: prefer certified ones, then higher value."""
    scored = []
    for K in candidates:
        v = problem.value(K)
        if not math.isfinite(v):
            continue
        res = _stationarity_residual(problem.gradient(K), K)
        scored.append((K, v, res))
    certified = [s for s in scored if s[2] <= kkt_tol]
    pool = certified if certified else scored
    best = max(pool, key=lambda s: (s[1], -s[2]))
    return best


def _finish(problem, K_pg, path, iterations, cfg, polish):
    candidates = [K_pg]
    K_polished = polish(K_pg)
    if K_polished is not None:
        candidates.append(K_polished)
    for base in list(candidates):
        snapped = _snap_small_coordinates(base)
        if snapped is not None:
            candidates.append(snapped)
    K, value, residual = _select_candidate(problem, candidates, cfg.kkt_tol)
    if value >= path[-1]:
        path = path + [value]
    n = problem.n
    status = SolveStatus.CONVERGED if residual <= cfg.kkt_tol else SolveStatus.MAX_ITERS
    return SolveReport(
        weight=SimplexWeight(np.clip(K, 0.0, None)),
        objective=problem.objective_value(K),
        kkt_residual=residual,
        iterations=iterations,
        status=status,
        objective_path=tuple(v / n for v in path),
    )


def solve_approx(mom: MomentPair, n: int, cfg: SolverConfig | None = None) -> SolveReport:
    """Maximise the quadratic surrogate over the unit simplex."""
    cfg = cfg or SolverConfig()
    problem = ApproxProblem(mom, n)
    if problem.m == 1:
        K = np.ones(1)
        return SolveReport(SimplexWeight(K), problem.objective_value(K), 0.0, 0,
                           SolveStatus.CONVERGED, (problem.value(K) / n,))
    K0 = np.full(problem.m, 1.0 / problem.m)
    K_pg, _, path, iterations, _ = _pg_maximize(problem, K0, cfg)
    polish = lambda K: _qp_active_set(problem.mean, problem.M, K, cfg.kkt_tol)
    return _finish(problem, K_pg, path, iterations, cfg, polish)


def solve_exact(cp: CompoundPanel, cfg: SolverConfig | None = None) -> SolveReport:
    """Maximise the exact expected log growth over the unit simplex.

    Starts from the uniform mix, falling back to the feasible vertex with
    the best single-asset growth when the uniform mix leaves the log
    domain. When every vertex is infeasible (each asset loses everything
    in some block) the report carries status InfeasibleExact and no
    weight.
    """
    cfg = cfg or SolverConfig()
    problem = ExactProblem(cp)
    m = problem.m
    if m == 1:
        K = np.ones(1)
        v = problem.value(K)
        if not math.isfinite(v):
            return _infeasible_report(problem)
        return SolveReport(SimplexWeight(K), problem.objective_value(K), 0.0, 0,
                           SolveStatus.CONVERGED, (v / problem.n,))
    K0 = np.full(m, 1.0 / m)
    if not math.isfinite(problem.value(K0)):
        best_vertex, best_value = None, float("-inf")
        for i in range(m):
            e = np.zeros(m)
            e[i] = 1.0
            v = problem.value(e)
            if v > best_value:
                best_vertex, best_value = e, v
        if best_vertex is None or not math.isfinite(best_value):
            return _infeasible_report(problem)
        K0 = best_vertex
    K_pg, _, path, iterations, _ = _pg_maximize(problem, K0, cfg)
    polish = lambda K: _exact_active_set(problem, K, cfg.kkt_tol)
    return _finish(problem, K_pg, path, iterations, cfg, polish)


def _infeasible_report(problem: ExactProblem) -> SolveReport:
    least_violations = min(
        problem.violations(np.eye(problem.m)[i]) for i in range(problem.m)
    )
    return SolveReport(
        weight=None,
        objective=ObjectiveValue(float("-inf"), False, max(1, least_violations)),
        kkt_residual=float("inf"),
        iterations=0,
        status=SolveStatus.INFEASIBLE_EXACT,
        objective_path=(),
    )


def lattice_size(m: int, step: float) -> int:
    """Number of simplex lattice points at the given resolution."""
    q = int(round(1.0 / step))
    if q < 1:
        raise ConfigError(f"grid step {step} coarser than the whole simplex")
    return math.comb(q + m - 1, m - 1)


def _lattice_batches(m: int, q: int, rows: int):
    scale = 1.0 / q
    if m == 1:
        yield np.ones((1, 1))
        return
    pending: list = []
    count = 0

    def blocks(prefix, remaining):
        if len(prefix) == m - 2:
            j = np.arange(remaining + 1, dtype=float)
            block = np.empty((remaining + 1, m))
            block[:, : m - 2] = prefix
            block[:, m - 2] = j
            block[:, m - 1] = remaining - j
            yield block
        else:
            for v in range(remaining + 1):
                yield from blocks(prefix + [float(v)], remaining - v)

    for block in blocks([], q):
        pending.append(block)
        count += block.shape[0]
        if count >= rows:
            yield np.vstack(pending) * scale
            pending, count = [], 0
    if pending:
        yield np.vstack(pending) * scale


def grid_oracle(problem, step: float | None = None) -> SolveReport:
    """Exhaustive search over the simplex lattice with spacing ~step.

    Test oracle only: scores every lattice point and returns the best.
    Raises LatticeTooLarge when the lattice would exceed
    MAX_LATTICE_POINTS points.
    """
    step = 0.01 if step is None else step
    if not 0.0 < step <= 1.0:
        raise ConfigError(f"grid step must lie in (0, 1], got {step}")
    m = problem.m
    q = int(round(1.0 / step))
    size = lattice_size(m, step)
    if size > MAX_LATTICE_POINTS:
        raise LatticeTooLarge(
            f"lattice for m={m}, step={step} has {size} points "
            f"(limit {MAX_LATTICE_POINTS})"
        )
    if problem.kind == "exact":
        rows = max(1024, 4_000_000 // max(1, problem.X.shape[0]))
    else:
        rows = 100_000
    best_value = float("-inf")
    best_K = None
    for batch in _lattice_batches(m, q, rows):
        values = problem.value_batch(batch)
        i = int(np.argmax(values))
        if values[i] > best_value:
            best_value = float(values[i])
            best_K = batch[i]
    if best_K is None or not math.isfinite(best_value):
        if problem.kind == "exact":
            return _infeasible_report(problem)
        raise ConfigError("lattice search found no finite value")
    residual = _stationarity_residual(problem.gradient(best_K), best_K)
    return SolveReport(
        weight=SimplexWeight(best_K),
        objective=problem.objective_value(best_K),
        kkt_residual=residual,
        iterations=size,
        status=SolveStatus.CONVERGED,
        objective_path=(best_value / problem.n,),
    )
