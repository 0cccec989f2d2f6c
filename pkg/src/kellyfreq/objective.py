"""Expected log-growth objectives over the unit simplex.

Write x(s) for the fee-adjusted n-period compound return vector of block s.
The exact objective is the per-period expected log growth

    elg(K) = (1/n) * mean_s log(1 + K'x(s)),

concave in K, equal to -inf (tagged, not raised) wherever some block has
1 + K'x(s) <= 0. The quadratic surrogate replaces the log with its
second-order expansion around zero,

    elg_hat(K) = (1/n) * (K'mu - 0.5 * K'M K),

where mu is the sample mean of x and M the raw second moment matrix
(normalised by the number of blocks S, not S-1). Both objectives and their
gradients are defined for arbitrary weight vectors, not just simplex
members, so finite-difference checks can probe off-simplex points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, DomainViolation, EmptyPanel
from .market_data import CompoundPanel
from .validation import as_float_matrix, as_float_vector, check_weight_vector, readonly

SIMPLEX_SUM_TOL = 1e-12
PSD_EIG_TOL = -1e-10


@dataclass(frozen=True)
class SimplexWeight:
    """A portfolio weight vector: non-negative entries summing to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = as_float_vector(self.weights, "weights")
        if w.shape[0] < 1:
            raise DimensionMismatch("weight vector must have at least one entry")
        if np.any(w < 0.0):
            raise DomainViolation(f"weights must be non-negative, min is {w.min()}")
        if abs(w.sum() - 1.0) > SIMPLEX_SUM_TOL:
            raise DomainViolation(f"weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "weights", readonly(w))

    def __len__(self) -> int:
        return self.weights.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.weights, dtype=dtype)

    def tolist(self) -> list:
        return self.weights.tolist()


@dataclass(frozen=True)
class MomentPair:
    """Sample mean and raw second moment of fee-adjusted compound returns."""

    mean: np.ndarray
    second_moment: np.ndarray

    def __post_init__(self):
        mean = as_float_vector(self.mean, "mean")
        M = as_float_matrix(self.second_moment, "second_moment")
        m = mean.shape[0]
        if M.shape != (m, m):
            raise DimensionMismatch(f"second moment shape {M.shape} for mean length {m}")
        if not np.allclose(M, M.T, rtol=0.0, atol=1e-12):
            raise DomainViolation("second moment must be symmetric")
        if m > 0 and np.linalg.eigvalsh(M).min() < PSD_EIG_TOL:
            raise DomainViolation("second moment must be positive semidefinite")
        object.__setattr__(self, "mean", readonly(mean))
        object.__setattr__(self, "second_moment", readonly(M))

    @property
    def n_assets(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "second_moment": self.second_moment.tolist(),
        }


@dataclass(frozen=True)
class ObjectiveValue:
    """A growth value in nats per period, possibly -inf.

    ``finite`` is False exactly when some block violates the log domain,
    and ``domain_violations`` counts those blocks.
    """

    value: float
    finite: bool
    domain_violations: int = 0

    def __post_init__(self):
        if self.finite != (self.domain_violations == 0):
            raise DomainViolation("finite flag must match a zero violation count")
        if self.finite and not math.isfinite(self.value):
            raise DomainViolation("finite objective must carry a finite value")
        if not self.finite and self.value != float("-inf"):
            raise DomainViolation("non-finite objective must carry -inf")


def moments(cp: CompoundPanel) -> MomentPair:
    """Sample mean and raw second moment (1/S normaliser) of the fee-adjusted blocks."""
    X = cp.fee_adjusted
    if X.shape[0] < 1:
        raise EmptyPanel("need at least one block to form moments")
    mean = X.mean(axis=0)
    M = X.T @ X / X.shape[0]
    M = 0.5 * (M + M.T)
    return MomentPair(mean, M)


def exact_elg(cp: CompoundPanel, K) -> ObjectiveValue:
    """Per-period expected log growth of weight K on the panel's blocks."""
    K = check_weight_vector(K, cp.n_assets)
    gross = 1.0 + cp.fee_adjusted @ K
    violations = int(np.count_nonzero(gross <= 0.0))
    if violations:
        return ObjectiveValue(float("-inf"), False, violations)
    return ObjectiveValue(float(np.log(gross).mean() / cp.n), True, 0)


def exact_gradient(cp: CompoundPanel, K) -> np.ndarray:
    """Gradient of the exact objective, (1/n) * mean_s x(s) / (1 + K'x(s)).

    Raises DomainViolation when K leaves the log domain.
    """
    K = check_weight_vector(K, cp.n_assets)
    X = cp.fee_adjusted
    gross = 1.0 + X @ K
    if np.any(gross <= 0.0):
        raise DomainViolation(
            f"{int(np.count_nonzero(gross <= 0.0))} block(s) have non-positive growth at K"
        )
    return (X / gross[:, None]).mean(axis=0) / cp.n


def approx_elg(mom: MomentPair, n: int, K) -> ObjectiveValue:
    """Quadratic surrogate growth value. Finite everywhere."""
    K = check_weight_vector(K, mom.n_assets)
    value = (K @ mom.mean - 0.5 * K @ mom.second_moment @ K) / n
    return ObjectiveValue(float(value), True, 0)


def approx_gradient(mom: MomentPair, n: int, K) -> np.ndarray:
    """Gradient of the quadratic surrogate, (1/n) * (mu - M K)."""
    K = check_weight_vector(K, mom.n_assets)
    return (mom.mean - mom.second_moment @ K) / n


def approximation_gap_bound(cp: CompoundPanel, K_star, K_hat) -> float:
    """Upper bound on the per-period growth surrendered by using K_hat.

    By concavity of the log, when K_star maximises the exact objective

        0 <= elg(K_star) - elg(K_hat)
          <= (1/n) * log mean_s [(1 + K_star'x(s)) / (1 + K_hat'x(s))],

    and this function returns the sample estimate of the right-hand side.
    Both weights must stay inside the log domain on every block.
    """
    K_star = check_weight_vector(K_star, cp.n_assets, "K_star")
    K_hat = check_weight_vector(K_hat, cp.n_assets, "K_hat")
    g_star = 1.0 + cp.fee_adjusted @ K_star
    g_hat = 1.0 + cp.fee_adjusted @ K_hat
    if np.any(g_star <= 0.0) or np.any(g_hat <= 0.0):
        raise DomainViolation("gap bound needs both weights inside the log domain")
    return float(np.log(np.mean(g_star / g_hat)) / cp.n)


def taylor_violation_fraction(cp: CompoundPanel, K) -> float:
    """Fraction of blocks where |K' raw(s)| > 1.

    The quadratic surrogate comes from a log expansion whose convergence
    needs |K' raw| <= 1; this reports how often the data breaks that,
    leaving the judgement to the caller.
    """
    K = check_weight_vector(K, cp.n_assets)
    return float(np.mean(np.abs(cp.raw @ K) > 1.0))
