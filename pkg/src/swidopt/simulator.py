"""Monte Carlo simulation of the ordered flag protocol.

Every resource unit draws an independent rate for every user.  Users
test their rate against their threshold in feedback order; the first to
pass sends the only flag and is served.  If nobody passes the unit is idle
and carries zero rate.

Randomness comes from one PCG64 stream per (batch, user), derived from the
seed with ``SeedSequence(seed, spawn_key=(batch, user))``, so results do
not depend on how batches are spread over threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .analytics import PerformanceReport, Provenance, Scenario, ThresholdVector

DEFAULT_EPSILON = 0.05
_CHUNK = 1 << 16


@dataclass(frozen=True)
class TerminalBehavior:
    """``override=None`` is an honest terminal; otherwise the terminal flags
    against ``override`` while the base station keeps its reported threshold."""

    override: Optional[float] = None

    def __post_init__(self):
        if self.override is not None and not self.override >= 0:
            raise ValueError("override threshold must be nonnegative")

    @property
    def honest(self) -> bool:
        return self.override is None


HONEST = TerminalBehavior()


@dataclass(frozen=True)
class SimConfig:
    resource_units: int
    batches: int = 16
    seed: int = 0
    behaviors: Mapping[int, TerminalBehavior] = field(default_factory=dict)
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if int(self.resource_units) != self.resource_units or self.resource_units < 1:
            raise ValueError("resource_units must be a positive integer")
        if int(self.batches) != self.batches or self.batches < 1:
            raise ValueError("batches must be a positive integer")
        if self.batches > self.resource_units:
            raise ValueError("more batches than resource units")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def behavior(self, position: int) -> TerminalBehavior:
        """Behavior of the user at 0-based feedback position."""
        return self.behaviors.get(position, HONEST)


@dataclass
class FeedbackStats:
    units: int = 0
    idle_units: int = 0
    flag_position_sum: int = 0
    # units served to each feedback position
    won: list = field(default_factory=list)

    @property
    def flagged_units(self) -> int:
        return self.units - self.idle_units

    @property
    def flags_per_unit(self) -> float:
        return self.flagged_units / self.units

    @property
    def idle_fraction(self) -> float:
        return self.idle_units / self.units

    @property
    def mean_flag_position(self) -> float:
        """Mean 1-based mini-slot of the winning flag over non-idle units."""
        return self.flag_position_sum / self.flagged_units if self.flagged_units else math.nan

    def merge(self, other: "FeedbackStats") -> None:
        self.units += other.units
        self.idle_units += other.idle_units
        self.flag_position_sum += other.flag_position_sum

    def to_dict(self) -> dict:
        return {"flags_per_unit": self.flags_per_unit,
                "mean_flag_position": _nan_to_none(self.mean_flag_position),
                "idle_fraction": self.idle_fraction}


@dataclass
class Tally:
    """Sufficient statistics of (flag indicator a, requested rate b = r a)
    over opportunities."""

    n: int = 0
    flags: int = 0
    rate_sum: float = 0.0
    rate_sq_sum: float = 0.0

    def merge(self, other: "Tally") -> None:
        self.n += other.n
        self.flags += other.flags
        self.rate_sum += other.rate_sum
        self.rate_sq_sum += other.rate_sq_sum

    @property
    def success(self) -> float:
        return self.flags / self.n if self.n else math.nan

    @property
    def conditional_rate(self) -> float:
        return self.rate_sum / self.n if self.n else math.nan


@dataclass
class MonitorState:
    """Per-user tallies the base station keeps whenever a user has its
    chance to flag.  ``observed`` uses only flags (what a base station
    sees); ``omniscient`` conditions on the true rates of earlier users
    against their reported thresholds."""

    user_ids: list
    reported: list
    observed: list
    omniscient: list
    epsilon: float = DEFAULT_EPSILON

    def merge(self, other: "MonitorState") -> None:
        for a, b in zip(self.observed, other.observed):
            a.merge(b)
        for a, b in zip(self.omniscient, other.omniscient):
            a.merge(b)


def _nan_to_none(x):
    return None if (isinstance(x, float) and math.isnan(x)) else x


class SimResult(NamedTuple):
    report: PerformanceReport
    feedback: FeedbackStats
    monitor: MonitorState

    def to_dict(self, unit: str = "nats", widen: bool = True) -> dict:
        verdicts = detect_misbehavior(self.monitor, widen=widen)
        return {"report": self.report.to_dict(unit),
                "feedback": self.feedback.to_dict(),
                "monitor": [v.to_dict() for v in verdicts]}


def _batch_sizes(units: int, batches: int) -> list[int]:
    base, extra = divmod(units, batches)
    return [base + (1 if b < extra else 0) for b in range(batches)]


def _stream(seed: int, batch: int, user: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(batch, user))))


def _run_batch(scenario: Scenario, reported: np.ndarray, acting: np.ndarray,
               seed: int, batch: int, units: int):
    m = scenario.size
    streams = [_stream(seed, batch, k) for k in range(m)]
    won = np.zeros(m, dtype=np.int64)
    rate_sum = np.zeros(m)
    feedback = FeedbackStats()
    obs = [Tally() for _ in range(m)]
    omni = [Tally() for _ in range(m)]
    done = 0
    while done < units:
        n = min(_CHUNK, units - done)
        r = np.column_stack([u.dist.sample(s, n) for u, s in zip(scenario.users, streams)])
        passes = r >= acting
        busy = passes.any(axis=1)
        winner = np.where(busy, passes.argmax(axis=1), m)  # m marks an idle unit
        served = np.where(busy, r[np.arange(n), np.minimum(winner, m - 1)], 0.0)
        counts = np.bincount(winner, minlength=m + 1)
        sums = np.bincount(winner, weights=served, minlength=m + 1)
        sq = np.bincount(winner, weights=served * served, minlength=m + 1)
        won += counts[:m]
        rate_sum += sums[:m]
        feedback.units += n
        feedback.idle_units += int(counts[m])
        feedback.flag_position_sum += int(np.dot(np.arange(1, m + 1), counts[:m]))
        # a flag-observable opportunity for position k: no flag before k
        reach = n - np.concatenate([[0], np.cumsum(counts[:m - 1])])
        below_reported = r < reported
        prefix = np.ones(n, dtype=bool)
        for k in range(m):
            obs[k].merge(Tally(int(reach[k]), int(counts[k]), float(sums[k]), float(sq[k])))
            hit = r[prefix, k] >= reported[k]
            b = np.where(hit, r[prefix, k], 0.0)
            omni[k].merge(Tally(int(prefix.sum()), int(hit.sum()), float(b.sum()), float(b @ b)))
            prefix &= below_reported[:, k]
        done += n
    return won, rate_sum, feedback, obs, omni


def simulate(scenario: Scenario, thresholds, config: SimConfig, threads: int = 1) -> SimResult:
    """Empirical performance of the protocol.

    Returns (report, feedback stats, monitor state); the report carries
    batch-means standard errors in ``report.stderr``.
    """
    reported = np.array(thresholds.rates if isinstance(thresholds, ThresholdVector)
                        else thresholds, dtype=float)
    m = scenario.size
    if len(reported) != m:
        raise ValueError(f"{len(reported)} thresholds for {m} users")
    if np.any(~(reported >= 0)):
        raise ValueError("thresholds must be nonnegative")
    for pos in config.behaviors:
        if not 0 <= pos < m:
            raise ValueError(f"behavior given for position {pos} outside 0..{m - 1}")
    acting = np.array([config.behavior(k).override if not config.behavior(k).honest
                       else reported[k] for k in range(m)], dtype=float)
    sizes = _batch_sizes(config.resource_units, config.batches)

    def job(b):
        return _run_batch(scenario, reported, acting, config.seed, b, sizes[b])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(job, range(config.batches)))
    else:
        results = [job(b) for b in range(config.batches)]

    n_total = config.resource_units
    won = np.zeros(m, dtype=np.int64)
    rate_sum = np.zeros(m)
    feedback = FeedbackStats()
    monitor = MonitorState([u.user_id for u in scenario.users], list(reported),
                           [Tally() for _ in range(m)], [Tally() for _ in range(m)],
                           config.epsilon)
    batch_r, batch_ar = [], []
    for (w, rs, fb, obs, omni), size in zip(results, sizes):
        won += w
        rate_sum += rs
        feedback.merge(fb)
        for a, b in zip(monitor.observed, obs):
            a.merge(b)
        for a, b in zip(monitor.omniscient, omni):
            a.merge(b)
        batch_r.append(rs / size)
        batch_ar.append(w / size)
    stderr = {}
    if config.batches > 1:
        root_b = math.sqrt(config.batches)
        stderr["R"] = np.std(batch_r, axis=0, ddof=1) / root_b
        stderr["AR"] = np.std(batch_ar, axis=0, ddof=1) / root_b
        stderr["sum_rate"] = np.array([np.std(np.sum(batch_r, axis=1), ddof=1) / root_b])
    report = PerformanceReport(
        user_ids=[u.user_id for u in scenario.users],
        rates=rate_sum / n_total,
        access=won / n_total,
        conditional=np.array([t.conditional_rate for t in monitor.observed]),
        success=np.array([t.success for t in monitor.observed]),
        weights=np.array(scenario.weights),
        provenance=Provenance.MONTE_CARLO,
        stderr=stderr,
    )
    feedback.won = [int(x) for x in won]
    return SimResult(report, feedback, monitor)


@dataclass(frozen=True)
class Verdict:
    user_id: str
    position: int
    statistic: float
    flagged: bool
    samples: int
    status: str
    stderr: float = math.nan

    def to_dict(self) -> dict:
        return {"user_id": self.user_id, "position": self.position,
                "statistic": _finite(self.statistic), "flagged": self.flagged,
                "samples": self.samples, "status": self.status,
                "stderr": _finite(self.stderr)}


def _finite(x):
    return float(x) if math.isfinite(x) else None


def monitor_statistic(threshold: float, tally: Tally, users_after: int):
    """|r* (1 - P) / Rc - (M - i)| and its delta-method standard error."""
    n = tally.n
    p = tally.success
    c = tally.conditional_rate
    if threshold == 0.0:
        return float(users_after), 0.0
    if c <= 0.0:
        return math.inf, math.inf
    value = threshold * (1.0 - p) / c
    var_a = p * (1.0 - p)
    var_b = max(tally.rate_sq_sum / n - c * c, 0.0)
    cov_ab = c * (1.0 - p)
    d_p = -threshold / c
    d_c = -threshold * (1.0 - p) / (c * c)
    var = (d_p * d_p * var_a + d_c * d_c * var_b + 2.0 * d_p * d_c * cov_ab) / n
    return abs(value - users_after), math.sqrt(max(var, 0.0))


def detect_misbehavior(monitor: MonitorState, users: Optional[int] = None,
                       epsilon: Optional[float] = None, widen: bool = True) -> list[Verdict]:
    """Check every user's tallies against the proportional-fair identity.

    A user is flagged when the statistic exceeds ``epsilon`` (plus three
    standard errors when ``widen``).  Users never given a chance are
    reported as insufficient data.
    """
    m = len(monitor.user_ids) if users is None else users
    eps = monitor.epsilon if epsilon is None else epsilon
    out = []
    for k, (uid, thr, tally) in enumerate(zip(monitor.user_ids, monitor.reported, monitor.observed)):
        if tally.n == 0:
            out.append(Verdict(uid, k + 1, math.nan, False, 0, "insufficient data"))
            continue
        stat, se = monitor_statistic(thr, tally, m - (k + 1))
        bound = eps + (3.0 * se if widen and math.isfinite(se) else 0.0)
        flagged = stat > bound
        out.append(Verdict(uid, k + 1, float(stat), bool(flagged), tally.n,
                           "flagged" if flagged else "ok", float(se)))
    return out


def feedback_load_comparison(stats: FeedbackStats, users: int) -> dict:
    """One flag per unit at most, against ``users`` messages under full feedback."""
    return {
        "flags_per_unit": stats.flags_per_unit,
        "mean_flag_position": _nan_to_none(stats.mean_flag_position),
        "idle_fraction": stats.idle_fraction,
        "full_feedback_messages_per_unit": users,
        "ratio_vs_full_feedback": stats.flags_per_unit / users,
    }
