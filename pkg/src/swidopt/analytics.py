"""Expected rates and access ratios of switched-diversity scheduling.

Users are held in feedback-sequence order: position 1 may flag first.
A threshold of ``math.inf`` marks a user that never flags.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .channel import ChannelModel, GenericRate, RateDistribution, as_rate_distribution

NEVER_FLAG = math.inf


class Provenance(str, Enum):
    ANALYTIC = "Analytic"
    MONTE_CARLO = "MonteCarlo"
    ANALYTIC_SELD = "Analytic-SelD"


@dataclass(frozen=True)
class User:
    user_id: str
    dist: RateDistribution

    @property
    def mean_snr(self) -> Optional[float]:
        return self.dist.model.mean_snr if self.dist.model is not None else None


@dataclass(frozen=True)
class Scenario:
    """Users in feedback order, their weights, and the RNG seed."""

    users: tuple
    weights: tuple = ()
    seed: int = 0

    def __post_init__(self):
        users = tuple(self.users)
        if not users:
            raise ValueError("a scenario needs at least one user")
        ids = [u.user_id for u in users]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate user ids: {ids}")
        weights = tuple(float(w) for w in self.weights) if self.weights else (1.0,) * len(users)
        if len(weights) != len(users):
            raise ValueError(f"{len(weights)} weights for {len(users)} users")
        if any(not (w >= 0 and math.isfinite(w)) for w in weights):
            raise ValueError(f"weights must be finite and nonnegative: {weights}")
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_models(cls, models: Sequence, weights: Sequence[float] = (), seed: int = 0,
                    ids: Optional[Sequence] = None) -> "Scenario":
        if ids is None:
            ids = [str(i + 1) for i in range(len(models))]
        users = tuple(User(str(uid), as_rate_distribution(m)) for uid, m in zip(ids, models))
        return cls(users, tuple(weights), seed)

    @property
    def size(self) -> int:
        return len(self.users)

    @property
    def dists(self) -> list[RateDistribution]:
        return [u.dist for u in self.users]

    def with_weights(self, weights: Sequence[float]) -> "Scenario":
        return Scenario(self.users, tuple(weights), self.seed)

    def generic(self) -> "Scenario":
        """Same scenario with every closed form hidden behind quadrature."""
        users = tuple(User(u.user_id, GenericRate.of(u.dist)) for u in self.users)
        return Scenario(users, self.weights, self.seed)


@dataclass(frozen=True)
class ThresholdVector:
    """Rate-domain thresholds (nats/s/Hz) aligned with feedback order."""

    rates: tuple

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if any(not r >= 0 for r in rates):
            raise ValueError(f"thresholds must be nonnegative: {rates}")
        object.__setattr__(self, "rates", rates)

    def __len__(self):
        return len(self.rates)

    def __iter__(self):
        return iter(self.rates)

    def __getitem__(self, i):
        return self.rates[i]

    @property
    def snr(self) -> list[float]:
        return snr_threshold_view(self)


def snr_threshold_view(thresholds) -> list[float]:
    """gamma* = e^{r*} - 1 for each threshold; never-flag stays infinite."""
    return [math.expm1(r) if r <= 709.0 else NEVER_FLAG for r in thresholds]


@dataclass
class PerformanceReport:
    user_ids: list
    rates: np.ndarray
    access: np.ndarray
    conditional: np.ndarray
    success: np.ndarray
    weights: np.ndarray
    provenance: Provenance = Provenance.ANALYTIC
    # standard errors, only for Monte Carlo reports
    stderr: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.user_ids)

    @property
    def sum_rate(self) -> float:
        return float(math.fsum(self.rates))

    @property
    def weighted_sum(self) -> float:
        return float(math.fsum(self.weights * self.rates))

    @property
    def product_rate(self) -> float:
        return float(np.prod(self.rates))

    @property
    def log_utility(self) -> float:
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(self.rates)))

    def rows(self, scale: float = 1.0) -> list[dict]:
        out = []
        for k, uid in enumerate(self.user_ids):
            out.append({
                "user_id": uid, "position": k + 1,
                "R": self.rates[k] * scale, "AR": self.access[k],
                "Rc": self.conditional[k] * scale, "P": self.success[k],
                "sum_rate": "", "weighted_sum": "", "provenance": self.provenance.value,
            })
        return out

    def to_dict(self, unit: str = "nats") -> dict:
        from .metrics import unit_scale
        s = unit_scale(unit)
        d = {
            "unit": unit,
            "provenance": self.provenance.value,
            "users": [{k: v for k, v in row.items() if k not in ("sum_rate", "weighted_sum", "provenance")}
                      for row in self.rows(s)],
            "sum_rate": self.sum_rate * s,
            "weighted_sum": self.weighted_sum * s,
            "product_rate": self.product_rate * s ** self.size,
        }
        for row in d["users"]:
            for key in ("R", "AR", "Rc", "P"):
                # Rc and P are undefined for users that never got a chance
                row[key] = _json_number(row[key])
        if self.stderr:
            d["stderr"] = {k: [float(x) * (s if k in ("R", "Rc") else 1.0) for x in v]
                           for k, v in self.stderr.items()}
        return d

    def to_csv(self, unit: str = "nats") -> str:
        from .metrics import unit_scale
        s = unit_scale(unit)
        buf = io.StringIO()
        fields = ["user_id", "position", "R", "AR", "Rc", "P", "sum_rate", "weighted_sum",
                  "provenance", "unit"]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in self.rows(s):
            row["unit"] = unit
            w.writerow({k: _fmt(v) for k, v in row.items()})
        w.writerow({"user_id": "total", "position": "", "R": _fmt(self.sum_rate * s),
                    "AR": _fmt(float(np.sum(self.access))), "Rc": "", "P": "",
                    "sum_rate": _fmt(self.sum_rate * s), "weighted_sum": _fmt(self.weighted_sum * s),
                    "provenance": self.provenance.value, "unit": unit})
        return buf.getvalue()


def _json_number(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def conditional_rate(dist, threshold: float) -> float:
    """Integral of r f_R(r) over [threshold, inf).

    Closed form for Rayleigh channels, quadrature otherwise.
    """
    return as_rate_distribution(dist).partial_mean(float(threshold))


def _cdf(dist: RateDistribution, r: float) -> float:
    return 1.0 if r == NEVER_FLAG else float(dist.cdf(r))


def below_probabilities(scenario: Scenario, thresholds) -> np.ndarray:
    """F_{R_i}(r*_i) for every position."""
    return np.array([_cdf(u.dist, r) for u, r in zip(scenario.users, thresholds)])


def reach_probabilities(below: np.ndarray) -> np.ndarray:
    """Probability that position i gets its chance: prod_{j<i} F_j(r*_j)."""
    reach = np.empty(len(below))
    acc = 1.0
    for i, f in enumerate(below):
        reach[i] = acc
        acc *= f
    return reach


def expected_rates(scenario: Scenario, thresholds) -> PerformanceReport:
    thresholds = thresholds.rates if isinstance(thresholds, ThresholdVector) else tuple(thresholds)
    if len(thresholds) != scenario.size:
        raise ValueError(f"{len(thresholds)} thresholds for {scenario.size} users")
    below = below_probabilities(scenario, thresholds)
    reach = reach_probabilities(below)
    cond = np.array([conditional_rate(u.dist, r) for u, r in zip(scenario.users, thresholds)])
    success = 1.0 - below
    return PerformanceReport(
        user_ids=[u.user_id for u in scenario.users],
        rates=cond * reach,
        access=success * reach,
        conditional=cond,
        success=success,
        weights=np.array(scenario.weights),
        provenance=Provenance.ANALYTIC,
    )
