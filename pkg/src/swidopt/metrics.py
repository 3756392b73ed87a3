"""Fairness indices, unit conversion and switched-vs-selection gap tables."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .analytics import PerformanceReport, Scenario
from .channel import ChannelModel, as_rate_distribution, linear_to_db
from .seld import seld_iid_sum_capacity

NATS = "nats"
BITS = "bits"


def unit_scale(unit: str) -> float:
    if unit == NATS:
        return 1.0
    if unit == BITS:
        return 1.0 / math.log(2.0)
    raise ValueError(f"unknown unit {unit!r}; expected 'nats' or 'bits'")


def convert_units(value_nats, to: str = BITS):
    return value_nats * unit_scale(to)


def jain_index(x: Sequence[float]) -> float:
    """(sum x)^2 / (M sum x^2)."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("jain_index needs at least one value")
    if np.any(x < 0):
        raise ValueError("jain_index needs nonnegative values")
    total = x.sum()
    if not total > 0:
        raise ValueError("jain_index is undefined for an all-zero vector")
    # normalize first so that scaling x leaves the result bit-identical
    y = x / x.max()
    return float(y.sum() ** 2 / (len(y) * np.dot(y, y)))


def mud_gain_metric(report: PerformanceReport, models: Sequence) -> np.ndarray:
    """R_i divided by the user's unconditional mean rate."""
    if len(models) != report.size:
        raise ValueError("report and models are not aligned")
    means = np.array([as_rate_distribution(m).mean() for m in models])
    return report.rates / means


@dataclass(frozen=True)
class FairnessSummary:
    jain_access: float
    jain_mud_gain: float
    basis: str

    def to_dict(self):
        return {"jain_access": self.jain_access, "jain_mud_gain": self.jain_mud_gain,
                "basis": self.basis}


def fairness_summary(report: PerformanceReport, models: Sequence) -> FairnessSummary:
    basis = "MonteCarlo" if report.provenance.value == "MonteCarlo" else "Analytic"
    return FairnessSummary(jain_index(report.access),
                           jain_index(mud_gain_metric(report, models)), basis)


@dataclass(frozen=True)
class GapRow:
    mean_snr_db: float
    users: int
    swid_sum: float
    seld_sum: float

    @property
    def gap(self) -> float:
        return self.seld_sum - self.swid_sum

    @property
    def ratio(self) -> float:
        return self.swid_sum / self.seld_sum


def swid_iid_max_sum_rate(mean_snr: float, users: int) -> float:
    """Max sum rate of switched diversity over i.i.d. Rayleigh users, equal weights."""
    # local import: optimize depends on analytics, which metrics also imports
    from .optimize import weighted_sum_thresholds, max_weighted_sum
    sc = Scenario.from_models([ChannelModel(mean_snr)] * users)
    thr, _ = weighted_sum_thresholds(sc)
    return max_weighted_sum(sc, thr)


def gap_vs_full_feedback(mean_snr_db: Iterable[float], users: Iterable[int]) -> list[GapRow]:
    rows = []
    user_list = list(users)
    for db in mean_snr_db:
        g = float(10.0 ** (db / 10.0))
        for m in user_list:
            rows.append(GapRow(float(db), int(m), swid_iid_max_sum_rate(g, m),
                               seld_iid_sum_capacity(g, m)))
    return rows


def gap_table_csv(rows: Sequence[GapRow], unit: str = NATS) -> str:
    s = unit_scale(unit)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mean_snr_db", "M", "swid_sum", "seld_sum", "gap", "ratio", "unit"])
    for r in rows:
        w.writerow([repr(r.mean_snr_db), r.users, repr(r.swid_sum * s), repr(r.seld_sum * s),
                    repr(r.gap * s), repr(r.ratio), unit])
    return buf.getvalue()
