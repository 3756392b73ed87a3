"""Table generators for the published figure setups.

Each recipe returns a list of flat dict rows (rates in nats) that the CLI
writes as CSV.
"""
from __future__ import annotations

import warnings

import numpy as np

from .analytics import Scenario
from .channel import ChannelModel, NetworkSpec, build_network, db_to_linear
from .metrics import fairness_summary, gap_vs_full_feedback, jain_index, mud_gain_metric
from .optimize import DegenerateThresholdWarning, optimize_pf, optimize_weighted_sum, pf_threshold
from .region import Scheme, SequenceStrategy, order_users, sweep_region, timeshare_hull
from .seld import seld_proportional_fair, seld_rates

FIG1_SNR_DB = (10.0, 0.0)
PF_CURVE_SNR_DB = (-10.0, 0.0, 10.0, 20.0)
GAP_SNR_DB = (0.0, 6.0, 12.0, 18.0)
NETWORK_SNR_DB = (0.0, 20.0)
DEFAULT_USERS = tuple(range(1, 21))


def fig1_region(steps: int = 101, threads: int = 1):
    """Two users at 10 dB and 0 dB: selection curve, both switched
    sequences, and the time-sharing hull over the switched curves."""
    models = [ChannelModel(float(g)) for g in db_to_linear(FIG1_SNR_DB)]
    return region_curves(models, steps=steps, threads=threads)


def region_curves(models, steps: int = 101, rays=None, threads: int = 1):
    from .region import default_grid
    grid = default_grid(steps) if rays is None else [np.asarray(r, dtype=float) for r in rays]
    seld = sweep_region(models, Scheme.SELD, grid=grid, threads=threads)
    asc = sweep_region(models, Scheme.SWID, SequenceStrategy.ascending(), grid, threads)
    desc = sweep_region(models, Scheme.SWID, SequenceStrategy.descending(), grid, threads)
    hull = timeshare_hull([asc, desc]) if len(models) == 2 else None
    return seld, asc, desc, hull


def pf_threshold_table(snr_db=PF_CURVE_SNR_DB, max_after: int = 19):
    """Proportional-fair thresholds against the number of following users,
    normalized by the mean rate (rate view) and the mean SNR (SNR view)."""
    rows = []
    for db in snr_db:
        model = ChannelModel(float(db_to_linear(db)))
        dist = model.rate_distribution()
        mean = dist.mean()
        for k in range(max_after + 1):
            r = pf_threshold(dist, k)
            g = float(np.expm1(r))
            rows.append({"mean_snr_db": db, "users_after": k, "rate_threshold": r,
                         "normalized_rate_threshold": r / mean, "snr_threshold": g,
                         "normalized_snr_threshold": g / model.mean_snr})
    return rows


def normalized_rate_pdf_table(snr_db=PF_CURVE_SNR_DB, x_max: float = 5.0, points: int = 501):
    """Density of r / E[r] on a uniform grid."""
    rows = []
    x = np.linspace(0.0, x_max, points)
    for db in snr_db:
        dist = ChannelModel(float(db_to_linear(db))).rate_distribution()
        mean = dist.mean()
        dens = mean * np.asarray(dist.pdf(x * mean))
        rows.extend({"mean_snr_db": db, "normalized_rate": float(a), "pdf": float(b)}
                    for a, b in zip(x, dens))
    return rows


def gap_rows(snr_db=GAP_SNR_DB, users=DEFAULT_USERS):
    return gap_vs_full_feedback(snr_db, users)


def network_comparison(kind: str, users=DEFAULT_USERS, objectives=("max_sum", "proportional_fair"),
                       snr_db=NETWORK_SNR_DB):
    """Sum rate and both Jain indices for selection and switched scheduling
    (ascending and descending sequences) on a generated network."""
    lo, hi = (float(x) for x in db_to_linear(snr_db))
    rows = []
    for m in users:
        models = build_network(NetworkSpec(m, kind, lo, hi))
        for obj in objectives:
            if obj == "max_sum":
                sel = seld_rates(models)
            else:
                sel = seld_proportional_fair(models)
            f = fairness_summary(sel, models)
            rows.append(_comparison_row(kind, m, "MUSelD", obj, "-", sel.sum_rate, f))
            for strat in (SequenceStrategy.ascending(), SequenceStrategy.descending()):
                order = order_users(models, strat)
                ordered = [models[k - 1] for k in order]
                sc = Scenario.from_models(ordered)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", DegenerateThresholdWarning)
                    res = optimize_weighted_sum(sc) if obj == "max_sum" else optimize_pf(sc)
                f = fairness_summary(res.report, ordered)
                rows.append(_comparison_row(kind, m, "MUSwiD", obj, strat.tag,
                                            res.report.sum_rate, f))
    return rows


def _comparison_row(kind, m, scheme, obj, seq, sum_rate, fair):
    return {"network": kind, "M": m, "scheme": scheme, "objective": obj, "sequence": seq,
            "sum_rate": sum_rate, "jain_access": fair.jain_access,
            "jain_mud_gain": fair.jain_mud_gain}


# figure id -> (owning subcommand, description)
FIGURES = {
    "fig1": ("region", "two-user rate regions at 10 dB / 0 dB"),
    "fig2": ("report", "normalized PF rate thresholds vs users after"),
    "fig3": ("report", "normalized PF SNR thresholds vs users after"),
    "fig4": ("report", "normalized rate PDFs at -10, 0, 10, 20 dB"),
    "fig5": ("report", "i.i.d. max sum rate, selection vs switched"),
    "fig6": ("report", "i.i.d. switched/selection sum-rate ratio"),
    "fig7": ("benchmark", "Model 1 sum rates, max-sum and PF"),
    "fig8": ("benchmark", "Model 1 access-ratio Jain index"),
    "fig9": ("benchmark", "Model 2 PF sum rates"),
    "fig10": ("benchmark", "Model 2 multiuser-diversity-gain Jain index"),
}
