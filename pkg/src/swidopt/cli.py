"""Command-line entry point: ``swidopt {optimize,region,simulate,benchmark,report}``.

Exit status: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import warnings

import numpy as np

from . import recipes
from .analytics import Scenario, expected_rates
from .config import ConfigError, ScenarioFile, load_scenario, load_thresholds
from .metrics import fairness_summary, gap_table_csv, unit_scale
from .numerics import NumericalError
from .optimize import DegenerateThresholdWarning, ObjectiveKind, optimize_pf, optimize_weighted_sum
from .seld import seld_proportional_fair, seld_rates_with_zeros
from .simulator import feedback_load_comparison, simulate

log = logging.getLogger("swidopt")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def write_atomic(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".swidopt-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False, default=_json_default) + "\n"


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def rows_to_csv(rows, unit: str, rate_fields=()) -> str:
    """CSV of dict rows, converting the named rate columns and adding a unit column."""
    s = unit_scale(unit)
    buf = io.StringIO()
    if not rows:
        return ""
    fields = list(rows[0]) + ["unit"]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in rows:
        out = {}
        for k, v in row.items():
            if k in rate_fields:
                v = v * s
            out[k] = repr(float(v)) if isinstance(v, (float, np.floating)) else v
        out["unit"] = unit
        w.writerow(out)
    return buf.getvalue()


def parse_int_range(text: str) -> list[int]:
    """'1..20' or '2,4,8' (or a mix)."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                a, b = part.split("..")
                out.extend(range(int(a), int(b) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise UsageError(f"bad integer range {text!r}") from None
    if not out or min(out) < 1:
        raise UsageError(f"user counts must be positive: {text!r}")
    return out


def parse_float_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"bad number list {text!r}")
    return vals


def _require_config(args) -> ScenarioFile:
    if not args.config:
        raise UsageError("--config is required")
    return load_scenario(args.config)


def _check_reproduce(args, command):
    fig = args.reproduce
    if fig is None:
        return None
    if fig not in recipes.FIGURES:
        raise UsageError(f"unknown figure {fig!r}; choose from {', '.join(recipes.FIGURES)}")
    owner = recipes.FIGURES[fig][0]
    if owner != command:
        raise UsageError(f"{fig} is produced by the '{owner}' command")
    return fig


def _optimize(sf: ScenarioFile):
    sc = sf.scenario()
    if sf.objective.kind is ObjectiveKind.PROPORTIONAL_FAIR:
        return sc, optimize_pf(sc)
    return sc, optimize_weighted_sum(sc)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_optimize(args) -> int:
    if args.reproduce:
        raise UsageError("optimize has no figure presets")
    sf = _require_config(args)
    _, result = _optimize(sf)
    doc = result.to_dict(args.unit)
    doc["sequence"] = [sf.ids[k - 1] for k in sf.order]
    write_atomic(args.out, to_json(doc))
    return EXIT_OK


def _region_csv(seld, asc, desc, hull, unit):
    if hull is not None:
        marks = {(p.sequence, tuple(p.weights)): p.on_hull for p in hull.points}
        for c in (asc, desc):
            for p in c.points:
                p.on_hull = marks[(p.sequence, tuple(p.weights))]
    text = seld.to_csv(unit)
    for c in (asc, desc):
        text += c.to_csv(unit).split("\n", 1)[1]
    return text


def cmd_region(args) -> int:
    fig = _check_reproduce(args, "region")
    if fig:
        curves = recipes.fig1_region(threads=args.threads)
    else:
        sf = _require_config(args)
        if sf.users != 2 and sf.rays is None:
            raise UsageError("regions for more than two users need explicit weight rays")
        curves = recipes.region_curves(sf.models, steps=sf.region_steps, rays=sf.rays,
                                       threads=args.threads)
    write_atomic(args.out, _region_csv(*curves, args.unit))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.reproduce:
        raise UsageError("simulate has no figure presets")
    sf = _require_config(args)
    sc = sf.scenario()
    if args.thresholds:
        thresholds = load_thresholds(args.thresholds)
        if len(thresholds) != sc.size:
            raise UsageError(f"{len(thresholds)} thresholds for {sc.size} users")
    else:
        thresholds = list(_optimize(sf)[1].thresholds)
    config = sf.sim_config(seed=args.seed)
    result = simulate(sc, thresholds, config, threads=args.threads)
    doc = result.to_dict(args.unit)
    doc["feedback"].update(feedback_load_comparison(result.feedback, sc.size))
    doc["seed"] = config.seed
    doc["resource_units"] = config.resource_units
    write_atomic(args.out, to_json(doc))
    return EXIT_OK


def cmd_benchmark(args) -> int:
    fig = _check_reproduce(args, "benchmark")
    users = parse_int_range(args.m) if args.m else list(recipes.DEFAULT_USERS)
    if fig:
        if fig in ("fig7", "fig8"):
            rows = recipes.network_comparison("model1", users)
        else:
            rows = recipes.network_comparison("model2", users, objectives=("proportional_fair",))
        write_atomic(args.out, rows_to_csv(rows, args.unit, rate_fields=("sum_rate",)))
        return EXIT_OK
    sf = _require_config(args)
    sc, swid = _optimize(sf)
    ordered = [sf.models[k - 1] for k in sf.order]
    if sf.objective.kind is ObjectiveKind.PROPORTIONAL_FAIR:
        sel = seld_proportional_fair(sf.models, ids=sf.ids)
    else:
        sel = seld_rates_with_zeros(sf.models, sf.weights_by_index(), ids=sf.ids)
    idle = float(np.prod([u.dist.cdf(r) if r != math.inf else 1.0
                          for u, r in zip(sc.users, swid.thresholds)]))
    s = unit_scale(args.unit)
    doc = {
        "unit": args.unit,
        "objective": sf.objective.kind.value,
        "sequence": [sf.ids[k - 1] for k in sf.order],
        "swid": swid.report.to_dict(args.unit),
        "seld": sel.to_dict(args.unit),
        "swid_fairness": fairness_summary(swid.report, ordered).to_dict(),
        "seld_fairness": fairness_summary(sel, sf.models).to_dict(),
        "gap": (sel.sum_rate - swid.report.sum_rate) * s,
        "ratio": swid.report.sum_rate / sel.sum_rate,
        "feedback": {"swid_flags_per_unit": 1.0 - idle,
                     "seld_messages_per_unit": sf.users,
                     "ratio_vs_full_feedback": (1.0 - idle) / sf.users},
    }
    write_atomic(args.out, to_json(doc))
    return EXIT_OK


def cmd_report(args) -> int:
    fig = _check_reproduce(args, "report")
    if fig in ("fig2", "fig3"):
        rows = recipes.pf_threshold_table()
        text = rows_to_csv(rows, args.unit, rate_fields=("rate_threshold",))
    elif fig == "fig4":
        text = rows_to_csv(recipes.normalized_rate_pdf_table(), args.unit)
    elif fig in ("fig5", "fig6") or args.gap:
        snr = parse_float_list(args.snr) if args.snr else list(recipes.GAP_SNR_DB)
        users = parse_int_range(args.m) if args.m else list(recipes.DEFAULT_USERS)
        text = gap_table_csv(recipes.gap_rows(snr, users), args.unit)
    else:
        sf = _require_config(args)
        sc, res = _optimize(sf)
        ordered = [sf.models[k - 1] for k in sf.order]
        if args.format == "json":
            doc = {"unit": args.unit, "report": res.report.to_dict(args.unit),
                   "fairness": fairness_summary(res.report, ordered).to_dict()}
            text = to_json(doc)
        else:
            text = res.report.to_csv(args.unit)
    write_atomic(args.out, text)
    return EXIT_OK


# ---------------------------------------------------------------------------

def _threads_default():
    env = os.environ.get("SWIDOPT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer SWIDOPT_THREADS=%r", env)
    return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="scenario JSON file")
    common.add_argument("--out", metavar="PATH", help="output file (stdout if omitted)")
    common.add_argument("--unit", choices=("nats", "bits"), default="nats")
    common.add_argument("--seed", type=int, default=None, help="override the file's seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: $SWIDOPT_THREADS or 1)")
    common.add_argument("--reproduce", metavar="FIGK", help="figure preset, e.g. fig1")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="swidopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("optimize", parents=[common], help="optimal feedback thresholds")
    p.set_defaults(func=cmd_optimize)
    p = sub.add_parser("region", parents=[common], help="rate-region sweeps and hull")
    p.set_defaults(func=cmd_region)
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo protocol simulation")
    p.add_argument("--thresholds", metavar="PATH", help="optimize output to simulate")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("benchmark", parents=[common], help="switched vs selection diversity")
    p.add_argument("--m", metavar="RANGE", help="user counts for presets, e.g. 1..20")
    p.set_defaults(func=cmd_benchmark)
    p = sub.add_parser("report", parents=[common], help="metrics, gap tables, threshold curves")
    p.add_argument("--gap", action="store_true", help="switched vs selection i.i.d. gap table")
    p.add_argument("--snr", metavar="DB_LIST", help="mean SNRs in dB, e.g. 0,6,12,18")
    p.add_argument("--m", metavar="RANGE", help="user counts, e.g. 1..20")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="swidopt: %(levelname)s: %(message)s")
    if args.threads is None:
        args.threads = _threads_default()
    if args.threads < 1:
        print("swidopt: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateThresholdWarning)
            return args.func(args)
    except (ConfigError, UsageError, ValueError) as exc:
        print(f"swidopt: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, ArithmeticError) as exc:
        print(f"swidopt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BrokenPipeError:
        # reader went away (e.g. piped into head); nothing left to report
        sys.stderr.close()
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
