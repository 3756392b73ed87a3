"""Rate-region boundaries by weight sweeps, time-sharing hulls, and
feedback-sequence ordering."""
from __future__ import annotations

import csv
import io
import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .analytics import Scenario, expected_rates
from .channel import as_rate_distribution
from .optimize import DegenerateThresholdWarning, weighted_sum_thresholds
from .seld import seld_rates_with_zeros


class Scheme(str, Enum):
    SWID = "MUSwiD"
    SELD = "MUSelD"


class OrderKind(str, Enum):
    ASCENDING = "ascending"
    DESCENDING = "descending"
    GIVEN = "given"


@dataclass(frozen=True)
class SequenceStrategy:
    kind: OrderKind
    permutation: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", OrderKind(self.kind))
        object.__setattr__(self, "permutation", tuple(int(p) for p in self.permutation))

    @classmethod
    def ascending(cls):
        return cls(OrderKind.ASCENDING)

    @classmethod
    def descending(cls):
        return cls(OrderKind.DESCENDING)

    @classmethod
    def given(cls, perm):
        return cls(OrderKind.GIVEN, tuple(perm))

    @property
    def tag(self) -> str:
        if self.kind is OrderKind.GIVEN:
            return "given:" + "-".join(str(p) for p in self.permutation)
        return self.kind.value


def _mean_snr(model) -> float:
    d = as_rate_distribution(model)
    if d.model is None:
        raise ValueError("ordering by mean SNR needs channel models")
    return d.model.mean_snr


def order_users(models: Sequence, strategy: SequenceStrategy) -> list[int]:
    """Feedback order as 1-based user indices (stable sort by mean SNR)."""
    m = len(models)
    if strategy.kind is OrderKind.GIVEN:
        perm = list(strategy.permutation)
        if sorted(perm) != list(range(1, m + 1)):
            raise ValueError(f"{perm} is not a permutation of 1..{m}")
        return perm
    snr = [_mean_snr(x) for x in models]
    reverse = strategy.kind is OrderKind.DESCENDING
    # stable for ties in both directions
    idx = sorted(range(m), key=lambda k: -snr[k] if reverse else snr[k])
    return [k + 1 for k in idx]


def all_orders(users: int, allow: bool = False) -> list[SequenceStrategy]:
    if not allow:
        raise ValueError("enumerating every feedback order must be requested explicitly")
    if users > 5:
        raise ValueError("exhaustive sequence enumeration is limited to 5 users")
    return [SequenceStrategy.given(p) for p in itertools.permutations(range(1, users + 1))]


@dataclass
class RegionPoint:
    weights: np.ndarray
    rates: np.ndarray
    scheme: Scheme
    sequence: str
    on_hull: bool = False


@dataclass
class RegionCurve:
    points: list
    hull: list = field(default_factory=list)

    @property
    def users(self) -> int:
        return len(self.points[0].rates)

    def rate_matrix(self) -> np.ndarray:
        return np.array([p.rates for p in self.points])

    def to_csv(self, unit: str = "nats") -> str:
        from .metrics import unit_scale
        s = unit_scale(unit)
        m = self.users
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scheme", "sequence"] + [f"mu_{k}" for k in range(1, m + 1)]
                   + [f"R_{k}" for k in range(1, m + 1)] + ["on_hull", "unit"])
        for p in self.points:
            w.writerow([p.scheme.value, p.sequence] + [repr(float(x)) for x in p.weights]
                       + [repr(float(x) * s) for x in p.rates] + [int(p.on_hull), unit])
        return buf.getvalue()


def default_grid(steps: int = 101) -> list[np.ndarray]:
    """mu = (cos^2 t, sin^2 t), t uniform on [0, pi/2]; exact endpoints."""
    grid = []
    for k in range(steps):
        t = 0.5 * math.pi * k / (steps - 1)
        if k == 0:
            mu = (1.0, 0.0)
        elif k == steps - 1:
            mu = (0.0, 1.0)
        else:
            mu = (math.cos(t) ** 2, math.sin(t) ** 2)
        grid.append(np.array(mu))
    return grid


def _swid_point(models, order, mu):
    # weights and channels permuted into feedback order, rates mapped back
    pos = [k - 1 for k in order]
    sc = Scenario.from_models([models[k] for k in pos], [mu[k] for k in pos])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateThresholdWarning)
        thr, _ = weighted_sum_thresholds(sc)
    rates_in_order = expected_rates(sc, thr).rates
    rates = np.empty(len(models))
    rates[pos] = rates_in_order
    return rates


def sweep_region(models: Sequence, scheme: Scheme, sequence: Optional[SequenceStrategy] = None,
                 grid: Optional[Sequence] = None, threads: int = 1) -> RegionCurve:
    scheme = Scheme(scheme)
    grid = default_grid() if grid is None else [np.asarray(g, dtype=float) for g in grid]
    if not grid:
        raise ValueError("weight grid is empty")
    m = len(models)
    for mu in grid:
        if len(mu) != m:
            raise ValueError(f"weight vector {mu} does not match {m} users")
    if scheme is Scheme.SWID:
        if sequence is None:
            raise ValueError("switched diversity needs a feedback sequence")
        order = order_users(models, sequence)
        tag = sequence.tag

        def point(mu):
            return _swid_point(models, order, mu)
    else:
        tag = "-"

        def point(mu):
            return seld_rates_with_zeros(models, mu).rates

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rates = list(ex.map(point, grid))
    else:
        rates = [point(mu) for mu in grid]
    points = [RegionPoint(mu, r, scheme, tag) for mu, r in zip(grid, rates)]
    return RegionCurve(points)


# ---------------------------------------------------------------------------
# Time-sharing hull (two users)
# ---------------------------------------------------------------------------

def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def upper_right_hull(points: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Vertices of the Pareto part of the convex hull of 2-D points,
    ordered by increasing first coordinate."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("time-sharing hulls are built for two users only")
    # free disposal: drop to the axes so the hull is closed towards the origin
    cloud = sorted({(float(x), float(y)) for x, y in pts})
    upper = []
    for p in cloud:
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) >= -tol:
            upper.pop()
        upper.append(p)
    upper = np.array(upper)
    # keep the part that runs from the highest-R2 vertex to the highest-R1 vertex
    top = int(np.argmax(upper[:, 1]))
    ties = np.flatnonzero(upper[:, 1] >= upper[top, 1] - tol)
    start = int(ties.max())
    return upper[start:]


def hull_height(hull: np.ndarray, x: float) -> float:
    """R2 on the hull at R1 = x (the hull is weakly decreasing)."""
    if x <= hull[0, 0]:
        return float(hull[0, 1])
    if x > hull[-1, 0]:
        return -math.inf
    return float(np.interp(x, hull[:, 0], hull[:, 1]))


def under_hull(hull: np.ndarray, point, tol: float = 1e-9) -> bool:
    """True when ``point`` lies weakly below the hull (distance tolerance ``tol``)."""
    p = np.asarray(point, dtype=float)
    if p[0] > hull[:, 0].max() + tol or p[1] > hull[:, 1].max() + tol:
        return False
    for a, b in zip(hull[:-1], hull[1:]):
        normal = np.array([a[1] - b[1], b[0] - a[0]])
        length = np.hypot(*normal)
        if length > 0 and normal @ (p - a) > tol * length:
            return False
    return True


def timeshare_hull(curves: Sequence[RegionCurve], tol: float = 1e-9) -> RegionCurve:
    """Union of the curves' points with the upper-right convex hull marked.

    Hull segments joining points of different sequences are time-sharing
    between those sequences.
    """
    pts = [p for c in curves for p in c.points]
    if not pts:
        raise ValueError("no points")
    m = len(pts[0].rates)
    if any(len(p.rates) != m for p in pts):
        raise ValueError("curves cover different user sets")
    hull = upper_right_hull(np.array([p.rates for p in pts]))
    marked = []
    for p in pts:
        d = np.min(np.linalg.norm(hull - p.rates, axis=1))
        marked.append(RegionPoint(p.weights, p.rates, p.scheme, p.sequence, bool(d <= tol)))
    return RegionCurve(marked, [row for row in hull])


def support(curve: RegionCurve, mu) -> float:
    """max over the curve's points of mu . R."""
    return float(np.max(curve.rate_matrix() @ np.asarray(mu, dtype=float)))


def dominates(outer: RegionCurve, inner: RegionCurve, tol: float = 1e-9) -> bool:
    """Every point of ``inner`` lies in the region whose boundary ``outer``
    traces: mu . p <= max_q mu . q for every weight vector in ``outer``."""
    inner_pts = inner.rate_matrix()
    for p in outer.points:
        bound = float(p.rates @ p.weights)
        if np.any(inner_pts @ p.weights > bound + tol):
            return False
    return True
