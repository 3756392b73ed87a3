"""Optimal per-user feedback thresholds.

Weighted-sum objectives are solved by a backward pass from the last user
(whose threshold is always zero).  Proportional fairness decouples into
one scalar equation per user that depends only on that user's own rate
distribution and on how many users follow it in the sequence.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .analytics import (NEVER_FLAG, PerformanceReport, Scenario, ThresholdVector,
                        below_probabilities, conditional_rate, expected_rates,
                        reach_probabilities, snr_threshold_view)
from .channel import RateDistribution, as_rate_distribution
from .numerics import DEFAULT_ROOT, RootSpec, find_root

log = logging.getLogger(__name__)

FD_STEP = 1e-5
GRADIENT_RTOL = 1e-4
PF_CONSISTENCY_TOL = 1e-5


class DegenerateThresholdWarning(UserWarning):
    """An interior threshold collapsed to zero (all later weights vanish)."""


class GradientMismatchWarning(UserWarning):
    pass


class ObjectiveKind(str, Enum):
    WEIGHTED_SUM = "weighted_sum"
    PROPORTIONAL_FAIR = "proportional_fair"


@dataclass(frozen=True)
class Objective:
    kind: ObjectiveKind
    weights: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", ObjectiveKind(self.kind))
        w = tuple(float(x) for x in self.weights)
        if self.kind is ObjectiveKind.WEIGHTED_SUM and w:
            if any(x < 0 for x in w):
                raise ValueError("weights must be nonnegative")
            if not any(x > 0 for x in w):
                raise ValueError("weights must not all be zero")
        object.__setattr__(self, "weights", w)

    @classmethod
    def weighted_sum(cls, weights=()) -> "Objective":
        return cls(ObjectiveKind.WEIGHTED_SUM, tuple(weights))

    @classmethod
    def proportional_fair(cls) -> "Objective":
        return cls(ObjectiveKind.PROPORTIONAL_FAIR)

    def value(self, report: PerformanceReport) -> float:
        if self.kind is ObjectiveKind.PROPORTIONAL_FAIR:
            return report.log_utility
        w = np.asarray(self.weights) if self.weights else report.weights
        return float(math.fsum(w * report.rates))


@dataclass
class OptimizationResult:
    thresholds: ThresholdVector
    objective: float
    report: PerformanceReport
    residual: float
    kind: ObjectiveKind
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self, unit: str = "nats") -> dict:
        from .metrics import unit_scale
        s = unit_scale(unit)
        snr = snr_threshold_view(self.thresholds)
        obj = self.objective
        if self.kind is ObjectiveKind.WEIGHTED_SUM:
            obj = obj * s
        else:
            # sum of log rates shifts by M log s under a unit change
            obj = obj + self.report.size * math.log(s)
        return {
            "unit": unit,
            "objective_kind": self.kind.value,
            "thresholds_rate": [_finite_or_none(r * s) for r in self.thresholds],
            "thresholds_snr": [_finite_or_none(g) for g in snr],
            "objective": obj,
            "residual": self.residual,
            "report": self.report.to_dict(unit),
            "diagnostics": self.diagnostics,
        }


def _finite_or_none(x):
    # never-flag thresholds serialize as null
    return None if math.isinf(x) else float(x)


# ---------------------------------------------------------------------------
# Weighted sum
# ---------------------------------------------------------------------------

def weighted_sum_thresholds(scenario: Scenario, weights: Optional[Sequence[float]] = None):
    """Backward recursion.  Returns (thresholds, values) where ``values[i]``
    is the best weighted rate collectable from positions i.. onward given
    that position i gets its chance (``values[M]`` = 0)."""
    mu = np.asarray(scenario.weights if weights is None else weights, dtype=float)
    m = scenario.size
    if len(mu) != m:
        raise ValueError(f"{len(mu)} weights for {m} users")
    if np.any(mu < 0):
        raise ValueError("weights must be nonnegative")
    if not np.any(mu > 0):
        raise ValueError("weights must not all be zero")
    thr = [0.0] * m
    values = [0.0] * (m + 1)
    for i in range(m - 1, -1, -1):
        dist = scenario.users[i].dist
        ahead = values[i + 1]
        if i == m - 1:
            r = 0.0
        elif mu[i] > 0:
            r = ahead / mu[i]
        elif ahead > 0:
            r = NEVER_FLAG
        else:
            r = 0.0
        if r == 0.0 and i < m - 1:
            warnings.warn(f"threshold at position {i + 1} collapsed to zero; "
                          "every later user has zero weight", DegenerateThresholdWarning,
                          stacklevel=2)
        thr[i] = r
        if r == NEVER_FLAG:
            values[i] = ahead
        else:
            values[i] = float(mu[i] * conditional_rate(dist, r) + float(dist.cdf(r)) * ahead)
    return thr, values


def max_weighted_sum(scenario: Scenario, thresholds) -> float:
    """mu_1 [C_1(r*_1) + r*_1 F_1(r*_1)]: optimum value read off the first user."""
    mu1 = scenario.weights[0]
    r1 = thresholds[0]
    d = scenario.users[0].dist
    if r1 == NEVER_FLAG:
        raise ValueError("first user never flags; value not expressible through it")
    return float(mu1 * (conditional_rate(d, r1) + r1 * float(d.cdf(r1))))


def thresholds_by_sum_form(scenario: Scenario, thresholds) -> list[float]:
    """mu_i r*_i = sum_{j>i} mu_j C_j(r*_j) prod_{i<k<j} F_k(r*_k), solved for r*_i.

    Evaluated from the later users' thresholds only, so it serves as an
    independent check on the backward recursion.
    """
    mu = scenario.weights
    m = scenario.size
    below = below_probabilities(scenario, thresholds)
    cond = [conditional_rate(u.dist, r) for u, r in zip(scenario.users, thresholds)]
    out = []
    for i in range(m):
        terms = []
        prod = 1.0
        for j in range(i + 1, m):
            terms.append(mu[j] * cond[j] * prod)
            prod *= below[j]
        total = math.fsum(terms)
        if mu[i] > 0:
            out.append(total / mu[i])
        else:
            out.append(NEVER_FLAG if total > 0 else 0.0)
    return out


def optimize_weighted_sum(scenario: Scenario) -> OptimizationResult:
    thr, values = weighted_sum_thresholds(scenario)
    tv = ThresholdVector(thr)
    report = expected_rates(scenario, tv)
    objective = Objective.weighted_sum(scenario.weights)
    if scenario.weights[0] > 0:
        achieved = max_weighted_sum(scenario, thr)
    else:
        achieved = values[0]
    residual, diag = _residual_with_diagnostics(scenario, thr, objective)
    return OptimizationResult(tv, achieved, report, residual, ObjectiveKind.WEIGHTED_SUM, diag)


# ---------------------------------------------------------------------------
# Proportional fairness
# ---------------------------------------------------------------------------

def pf_statistic(dist: RateDistribution, threshold: float) -> float:
    """r F(r) / C(r); increasing in r from 0 to infinity."""
    c = conditional_rate(dist, threshold)
    num = threshold * float(dist.cdf(threshold))
    if c <= 0.0:
        return math.inf
    return num / c


def pf_threshold(dist, users_after: int, spec: RootSpec = DEFAULT_ROOT) -> float:
    """Rate threshold of a user with ``users_after`` users behind it."""
    if users_after < 0 or int(users_after) != users_after:
        raise ValueError("users_after must be a nonnegative integer")
    if users_after == 0:
        return 0.0
    dist = as_rate_distribution(dist)
    target = float(users_after)
    start = max(dist.mean(), 1e-3)
    return find_root(lambda r: pf_statistic(dist, r) - target, 0.0, start, spec)


def pf_thresholds(scenario: Scenario, spec: RootSpec = DEFAULT_ROOT) -> list[float]:
    m = scenario.size
    return [pf_threshold(u.dist, m - 1 - i, spec) for i, u in enumerate(scenario.users)]


def optimize_pf(scenario: Scenario, spec: RootSpec = DEFAULT_ROOT) -> OptimizationResult:
    thr = pf_thresholds(scenario, spec)
    tv = ThresholdVector(thr)
    report = expected_rates(scenario, tv)
    objective = Objective.proportional_fair()
    residual, diag = _residual_with_diagnostics(scenario, thr, objective)
    # one pass of mu_i = 1/R_i through the weighted recursion
    weights = 1.0 / report.rates
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateThresholdWarning)
        ws_thr, _ = weighted_sum_thresholds(scenario, weights)
    gap = max((abs(a - b) for a, b in zip(thr, ws_thr)), default=0.0)
    diag["weighted_sum_consistency"] = float(gap)
    if gap > PF_CONSISTENCY_TOL:
        log.warning("PF thresholds differ from the mu=1/R weighted recursion by %.3g", gap)
    return OptimizationResult(tv, report.log_utility, report, residual,
                              ObjectiveKind.PROPORTIONAL_FAIR, diag)


# ---------------------------------------------------------------------------
# Gradients and stationarity
# ---------------------------------------------------------------------------

def rate_jacobian(scenario: Scenario, thresholds) -> np.ndarray:
    """J[i, j] = dR_j / dr*_i from the closed derivative table.

    Zero for i > j; -r*_i f_i(r*_i) prod_{k<i} F_k on the diagonal;
    C_j f_i(r*_i) prod_{k<j, k != i} F_k above it.  Rows of never-flag
    thresholds are zero.
    """
    m = scenario.size
    below = below_probabilities(scenario, thresholds)
    reach = reach_probabilities(below)
    cond = np.array([conditional_rate(u.dist, r) for u, r in zip(scenario.users, thresholds)])
    jac = np.zeros((m, m))
    for i in range(m):
        r = thresholds[i]
        if r == NEVER_FLAG:
            continue
        dens = float(scenario.users[i].dist.pdf(r))
        jac[i, i] = -r * dens * reach[i]
        for j in range(i + 1, m):
            others = np.prod(np.delete(below[:j], i))
            jac[i, j] = cond[j] * dens * others
    return jac


def rate_jacobian_ratio_form(scenario: Scenario, thresholds) -> np.ndarray:
    """Same Jacobian with the off-diagonal written as R_j f_i / F_i.

    Undefined where F_i(r*_i) = 0; those entries are NaN.
    """
    m = scenario.size
    rep = expected_rates(scenario, thresholds)
    below = below_probabilities(scenario, thresholds)
    reach = reach_probabilities(below)
    jac = np.zeros((m, m))
    for i in range(m):
        r = thresholds[i]
        if r == NEVER_FLAG:
            continue
        dens = float(scenario.users[i].dist.pdf(r))
        jac[i, i] = -r * dens * reach[i]
        for j in range(i + 1, m):
            jac[i, j] = rep.rates[j] * dens / below[i] if below[i] > 0 else math.nan
    return jac


def _fd_steps(r, h):
    # central where possible, forward at the r = 0 boundary
    if r - h < 0:
        return r, r + h
    return r - h, r + h


def rate_jacobian_fd(scenario: Scenario, thresholds, step: float = FD_STEP) -> np.ndarray:
    m = scenario.size
    thr = list(thresholds)
    jac = np.zeros((m, m))
    for i in range(m):
        if thr[i] == NEVER_FLAG:
            continue
        lo, hi = _fd_steps(thr[i], step)
        t_lo, t_hi = list(thr), list(thr)
        t_lo[i], t_hi[i] = lo, hi
        r_lo = expected_rates(scenario, t_lo).rates
        r_hi = expected_rates(scenario, t_hi).rates
        jac[i] = (r_hi - r_lo) / (hi - lo)
    return jac


def _objective_weights(scenario, thresholds, objective: Objective):
    if objective.kind is ObjectiveKind.PROPORTIONAL_FAIR:
        rates = expected_rates(scenario, thresholds).rates
        return 1.0 / rates
    return np.asarray(objective.weights or scenario.weights, dtype=float)


def objective_gradient(scenario: Scenario, thresholds, objective: Objective) -> np.ndarray:
    """dPhi/dr*_i assembled from the analytic Jacobian."""
    w = _objective_weights(scenario, thresholds, objective)
    return rate_jacobian(scenario, thresholds) @ w


def objective_gradient_fd(scenario: Scenario, thresholds, objective: Objective,
                          step: float = FD_STEP) -> np.ndarray:
    m = scenario.size
    thr = list(thresholds)
    grad = np.zeros(m)

    def phi(t):
        return objective.value(expected_rates(scenario, t))

    for i in range(m):
        if thr[i] == NEVER_FLAG:
            continue
        lo, hi = _fd_steps(thr[i], step)
        t_lo, t_hi = list(thr), list(thr)
        t_lo[i], t_hi[i] = lo, hi
        grad[i] = (phi(t_hi) - phi(t_lo)) / (hi - lo)
    return grad


def gradients_agree(analytic: np.ndarray, numeric: np.ndarray, rtol: float = GRADIENT_RTOL,
                    atol: float = 1e-7) -> bool:
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return bool(np.all(np.abs(analytic - numeric) <= rtol * scale + atol))


def _residual_with_diagnostics(scenario, thresholds, objective):
    m = scenario.size
    if m == 1:
        return 0.0, {"gradients_agree": True}
    a = objective_gradient(scenario, thresholds, objective)[: m - 1]
    n = objective_gradient_fd(scenario, thresholds, objective)[: m - 1]
    agree = gradients_agree(a, n)
    if not agree:
        warnings.warn(f"analytic and finite-difference gradients disagree: {a} vs {n}",
                      GradientMismatchWarning, stacklevel=3)
    residual = float(max(np.max(np.abs(a)), np.max(np.abs(n))))
    return residual, {"gradients_agree": agree}


def stationarity_residual(scenario: Scenario, thresholds, objective: Objective) -> float:
    """max over i < M of |dPhi/dr*_i|, taking the worse of analytic and central
    finite-difference evaluations."""
    thr = thresholds.rates if isinstance(thresholds, ThresholdVector) else tuple(thresholds)
    return _residual_with_diagnostics(scenario, thr, objective)[0]
