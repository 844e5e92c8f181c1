"""Command-line front end: evaluate scenarios, run sweeps, emit figure tables.

Every command writes one table, as CSV (``# schema:`` header comment, 9
significant digits) or as JSON with ``--json``.  Output depends only on the
scenario, the flags and the seed.

Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence,
4 analytic and Monte-Carlo values disagree under ``--strict``.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .absorption import AbsorptionMedium, CatalogError, load_line_catalog, \
    molecular_absorption_coefficient
from .analysis import association
from .coverage import (
    DEFAULT_COVERAGE, BlockageModel, CoverageResult, coverage_rf, coverage_thz_with_blockage,
    coverage_total, coverage_with_mobility,
)
from .handoff import RF_MAPPINGS, overall_ho_probability
from .model import Scenario, ScenarioError, load_scenario, rate_to_sinr_threshold, \
    scenario_fields
from .montecarlo import SimConfig, run_trials
from .numerics import BracketError, ConvergenceError

EXIT_OK, EXIT_INPUT, EXIT_NUMERICS, EXIT_MISMATCH = 0, 2, 3, 4

METRICS = ("A_T", "mu", "P_H", "P_HT", "P_HR", "C_T", "C_R", "C", "C_M")
SWEEP_VARIABLES = ("velocity", "ka", "lambda_T", "lambda_R", "rate_threshold",
                   "blocker_intensity")
_HO_METRICS = {"P_H", "P_HT", "P_HR"}
_COVERAGE_METRICS = {"C_T", "C_R", "C", "C_M"}


class InputError(ValueError):
    pass


# --- tables ---------------------------------------------------------------


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, str):
        return x
    return format(float(x), ".9g")


def _json_value(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    if isinstance(x, str):
        return x
    return float(format(float(x), ".9g"))


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    header: list = field(default_factory=list)     # (key, value) pairs

    def add(self, row):
        unknown = set(row) - set(self.columns)
        if unknown:
            raise KeyError(f"unknown columns {sorted(unknown)}")
        self.rows.append({c: row.get(c) for c in self.columns})

    def to_csv(self):
        out = io.StringIO()
        out.write("# schema: " + ",".join(self.columns) + "\n")
        for key, value in self.header:
            out.write(f"# {key} = {_fmt(value)}\n")
        out.write(",".join(self.columns) + "\n")
        for row in self.rows:
            out.write(",".join(_fmt(row[c]) for c in self.columns) + "\n")
        return out.getvalue()

    def to_json(self):
        doc = {
            "schema": list(self.columns),
            "header": {k: (v if isinstance(v, str) else _json_value(v)) for k, v in self.header},
            "rows": [{c: _json_value(row[c]) for c in self.columns} for row in self.rows],
        }
        return json.dumps(doc, indent=2) + "\n"


# --- evaluation -----------------------------------------------------------


@dataclass(frozen=True)
class Point:
    """One abscissa of a table: the scenario plus optional blockage."""
    scenario: Scenario
    labels: dict
    blockage: BlockageModel | None = None


def analytic_metrics(s, metrics, *, blockage=None, mapping="surrogate", cfg=DEFAULT_COVERAGE):
    wanted = set(metrics)
    out = {}
    assoc = association(s)
    out["A_T"], out["mu"] = assoc.a_t, assoc.mu
    ho = None
    if wanted & _HO_METRICS or ("C_M" in wanted and s.mobility.ho_cost > 0):
        ho = overall_ho_probability(s, mapping=mapping)
        out.update(P_H=ho.p_overall, P_HT=ho.p_ho_from_thz, P_HR=ho.p_ho_from_rf)
    if wanted & _COVERAGE_METRICS:
        if blockage is None:
            cov = coverage_total(s, cfg)
        else:
            a_t = assoc.a_t
            tau_t = rate_to_sinr_threshold(s.rate_threshold, s.thz.bandwidth)
            tau_r = rate_to_sinr_threshold(s.rate_threshold, s.rf.bandwidth)
            c_t = coverage_thz_with_blockage(s, cfg, tau_t, blockage) if a_t > 0 else 0.0
            c_r = coverage_rf(s, cfg, tau_r) if a_t < 1 else 0.0
            cov = CoverageResult(a_t, c_t, c_r, a_t * c_t + (1 - a_t) * c_r)
        out.update(C_T=cov.c_t, C_R=cov.c_r, C=cov.c)
        if "C_M" in wanted:
            out["C_M"] = coverage_with_mobility(s, cfg, coverage=cov, handoff=ho)
    return {m: out.get(m) for m in metrics}


def montecarlo_metrics(s, metrics, sim, *, blockage=None):
    """Simulated values and Wilson intervals; ``mu`` has no simulated counterpart."""
    wanted = set(metrics)
    coverage = bool(wanted & _COVERAGE_METRICS)
    res = run_trials(s, sim, coverage=coverage, with_mobility="C_M" in wanted,
                     blockage=blockage)
    est = {"A_T": res.association()}
    est["P_HT"], est["P_HR"], est["P_H"] = res.handoff()
    if coverage:
        est["C"], est["C_T"], est["C_R"] = res.static_coverage()
        est["C_M"] = res.coverage()[0]
    out = {}
    for m in metrics:
        e = est.get(m)
        if e is None:
            out[m] = (math.nan, math.nan, math.nan)
        else:
            lo, hi = e.interval()
            out[m] = (e.value, lo, hi)
    return out, res.redraws


def evaluate_points(points, metrics, *, key_columns, sim=None, mapping="surrogate",
                    tolerance=0.02, header=()):
    """Analytic row (and a Monte-Carlo row when ``sim`` is given) per point.

    Returns the table and the list of disagreements, i.e. metrics whose
    analytic value lies outside the Wilson interval widened by ``tolerance``.
    """
    columns = list(key_columns) + ["method"] + list(metrics)
    if sim is not None:
        columns += [f"{m}_{side}" for m in metrics for side in ("lo", "hi")]
    table = ResultTable(columns, header=list(header))
    mismatches = []
    for p in points:
        a = analytic_metrics(p.scenario, metrics, blockage=p.blockage, mapping=mapping)
        table.add({**p.labels, "method": "analytic", **a})
        if sim is None:
            continue
        mc, _ = montecarlo_metrics(p.scenario, metrics, sim, blockage=p.blockage)
        row = {**p.labels, "method": "montecarlo"}
        for m, (value, lo, hi) in mc.items():
            row[m], row[f"{m}_lo"], row[f"{m}_hi"] = value, lo, hi
            av = a[m]
            if av is None or math.isnan(value):
                continue
            if not (lo - tolerance <= av <= hi + tolerance):
                mismatches.append((p.labels, m, av, value))
        table.add(row)
    for row in table.rows:
        for m in metrics:
            v = row[m]
            if v is not None and m != "mu" and not math.isnan(v) and not 0.0 <= v <= 1.0:
                raise ConvergenceError(f"{m}={v!r} outside [0, 1]")
    return table, mismatches


# --- sweeps and presets ---------------------------------------------------


def _apply(s, variable, value, blocker_size):
    if variable == "blocker_intensity":
        length, width = blocker_size
        return s, BlockageModel(value, length, width)
    return s.with_params(**{variable: value}), None


def sweep_points(s, variable, values, blocker_size=(5.0, 5.0), extra_labels=None):
    if variable not in SWEEP_VARIABLES:
        raise InputError(f"unknown sweep variable {variable!r}")
    if not values:
        raise InputError("sweep needs at least one value")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise InputError("sweep values must be strictly increasing")
    points = []
    for v in values:
        sv, blockage = _apply(s, variable, v, blocker_size)
        points.append(Point(sv, {**(extra_labels or {}), variable: v}, blockage))
    return points


@dataclass(frozen=True)
class Preset:
    series: str            # second key column (a scenario override)
    series_values: tuple
    variable: str
    values: tuple
    metrics: tuple
    base: dict             # overrides applied to the default scenario
    notes: tuple = ()


_GRID_K = (0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2)
_GRID_LT = (5e-5, 1e-4, 5e-4, 1e-3)
_GRID_V = (0.0, 10.0, 20.0, 30.0, 40.0, 56.0)

PRESETS = {
    "fig3a": Preset("lambda_T", (1e-4, 5e-4, 1e-3), "velocity", _GRID_V[1:],
                    ("A_T", "P_HT"), {"ka": 0.01, "lambda_R": 1e-5},
                    ("intensity grid of TBSs assumed",)),
    "fig3b": Preset("ka", (0.01, 0.05), "velocity", _GRID_V[1:],
                    ("A_T", "P_HT", "P_HR"), {"lambda_R": 1e-5, "lambda_T": 1e-4},
                    ("velocity grid assumed",)),
    "fig4": Preset("ka", (0.01, 0.05), "velocity", _GRID_V[1:],
                   ("A_T", "P_HT", "P_HR", "P_H"), {"lambda_R": 1e-5, "lambda_T": 1e-4},
                   ("velocity grid assumed",)),
    "fig5": Preset("ka", (0.01, 0.05), "rate_threshold", (0.25e9, 0.5e9, 1e9, 2e9),
                   ("C_T", "C_R", "C", "C_M"),
                   {"lambda_R": 1e-5, "lambda_T": 1e-4, "velocity": 30.0, "eta": 0.5},
                   ("absorption values, velocity and handoff cost assumed",)),
    "fig6": Preset("ka", (0.01, 0.05), "lambda_T", _GRID_LT,
                   ("A_T", "C_T", "C_R", "C"), {"lambda_R": 1e-5, "rate_threshold": 1e9},
                   ("rate threshold and intensity grid assumed",)),
    "fig7": Preset("ka", (0.0, 0.05), "velocity", _GRID_V, ("mu", "P_H", "C", "C_M"),
                   {"lambda_R": 1e-5, "lambda_T": 1e-4, "eta": 0.5, "rate_threshold": 1e9},
                   ("ka = 0 stands for the case without molecular absorption",
                    "rate threshold and handoff cost assumed")),
    "fig8": Preset("lambda_T", _GRID_LT, "ka", _GRID_K, ("mu", "A_T"), {"lambda_R": 1e-5},
                   ("mu has no simulated counterpart; A_T is the simulated check",)),
    "fig9": Preset("lambda_T", _GRID_LT, "ka", _GRID_K, ("A_T", "P_H", "C", "C_M"),
                   {"lambda_R": 1e-5, "velocity": 56.0, "eta": 0.5, "rate_threshold": 0.1e9},
                   ("rate threshold 0.1 Gbps and handoff cost 0.5 assumed",)),
}


def preset_points(figure_id):
    try:
        preset = PRESETS[figure_id]
    except KeyError:
        raise InputError(f"unknown figure id {figure_id!r}; "
                         f"choose from {', '.join(PRESETS)}") from None
    base = Scenario().with_params(**preset.base)
    points = []
    for sv in preset.series_values:
        s = base.with_params(**{preset.series: sv})
        points += sweep_points(s, preset.variable, list(preset.values),
                               extra_labels={preset.series: sv})
    return preset, base, points


# --- commands -------------------------------------------------------------


def _scenario_header(s):
    return [(k, v) for k, v in scenario_fields(s).items()]


def _sim_config(args, overrides=()):
    opts = {"trials": args.trials, "seed": args.seed}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or key not in opts:
            raise InputError(f"--validate expects trials=N or seed=S, got {item!r}")
        try:
            opts[key] = int(value)
        except ValueError:
            raise InputError(f"--validate {key} must be an integer, got {value!r}") from None
    return SimConfig(trials=opts["trials"], seed=opts["seed"], threads=args.threads)


def _load(path):
    return Scenario() if path is None else load_scenario(path)


def _metrics(arg):
    if arg is None:
        return METRICS
    names = [m.strip() for m in arg.split(",") if m.strip()]
    bad = [m for m in names if m not in METRICS]
    if bad or not names:
        raise InputError(f"unknown metrics {bad}; choose from {', '.join(METRICS)}")
    return tuple(names)


def _values(arg):
    try:
        return [float(x) for x in arg.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"cannot parse sweep values {arg!r}") from None


def cmd_absorption(args):
    lines = load_line_catalog(args.catalog)
    if args.n_points < 1:
        raise InputError("--n-points must be at least 1")
    if not 0 < args.f_lo <= args.f_hi:
        raise InputError("need 0 < f_lo <= f_hi")
    if args.n_points == 1:
        freqs = np.array([args.f_lo])
    else:
        freqs = np.geomspace(args.f_lo, args.f_hi, args.n_points)
    ka = molecular_absorption_coefficient(AbsorptionMedium(lines), freqs)
    table = ResultTable(["f_hz", "ka_per_m"],
                        header=[("catalog", str(args.catalog)), ("lines", len(lines))])
    for f, k in zip(freqs, np.atleast_1d(ka)):
        table.add({"f_hz": f, "ka_per_m": k})
    return table, []


def cmd_evaluate(args):
    s = _load(args.scenario)
    metrics = _metrics(args.metrics)
    sim = None if args.validate is None else _sim_config(args, args.validate)
    header = _scenario_header(s) + [("rf_mapping", args.mapping)]
    if sim is not None:
        header += [("trials", sim.trials), ("seed", sim.seed)]
    return evaluate_points([Point(s, {})], metrics, key_columns=[], sim=sim,
                           mapping=args.mapping, tolerance=args.tolerance, header=header)


def cmd_sweep(args):
    s = _load(args.scenario)
    metrics = _metrics(args.metrics)
    points = sweep_points(s, args.variable, _values(args.values),
                          (args.blocker_length, args.blocker_width))
    sim = None if args.validate is None else _sim_config(args, args.validate)
    header = _scenario_header(s) + [("sweep", args.variable), ("rf_mapping", args.mapping)]
    if args.variable == "blocker_intensity":
        header += [("blocker_length_m", args.blocker_length),
                   ("blocker_width_m", args.blocker_width)]
    if sim is not None:
        header += [("trials", sim.trials), ("seed", sim.seed)]
    return evaluate_points(points, metrics, key_columns=[args.variable], sim=sim,
                           mapping=args.mapping, tolerance=args.tolerance, header=header)


def cmd_reproduce(args):
    preset, base, points = preset_points(args.figure)
    sim = None if args.analytic_only else _sim_config(args)
    header = [("figure", args.figure)] + _scenario_header(base)
    header += [(f"assumption_{k}", note) for k, note in enumerate(preset.notes, 1)]
    if sim is not None:
        header += [("trials", sim.trials), ("seed", sim.seed)]
    return evaluate_points(points, preset.metrics, key_columns=[preset.series, preset.variable],
                           sim=sim, tolerance=args.tolerance, header=header)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rfthz", description="Handoff and coverage analysis of hybrid RF/THz networks.")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=100_000)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--strict", action="store_true",
                        help="exit with status 4 when analytic and simulated values disagree")
    common.add_argument("--tolerance", type=float, default=0.02,
                        help="slack added to the 95%% interval in the --strict check")
    common.add_argument("--json", action="store_true", help="write JSON instead of CSV")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("absorption", parents=[common], help="K_a over a frequency grid")
    p.add_argument("catalog", type=Path)
    p.add_argument("--f-lo", type=float, required=True, help="Hz")
    p.add_argument("--f-hi", type=float, required=True, help="Hz")
    p.add_argument("--n-points", type=int, default=50)
    p.set_defaults(func=cmd_absorption)

    for name, func, helptext in (("evaluate", cmd_evaluate, "all metrics for one scenario"),
                                 ("sweep", cmd_sweep, "metrics over one swept parameter")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("scenario", nargs="?", type=Path,
                       help="scenario file (default: built-in reference scenario)")
        p.add_argument("--metrics", help=f"comma-separated subset of {','.join(METRICS)}")
        p.add_argument("--mapping", choices=RF_MAPPINGS, default="surrogate",
                       help="RF-to-THz distance mapping in the RF handoff term")
        p.add_argument("--validate", nargs="*", metavar="KEY=VALUE",
                       help="append Monte-Carlo rows; accepts trials=N seed=S")
        p.set_defaults(func=func)
        if name == "sweep":
            p.add_argument("--variable", required=True, choices=SWEEP_VARIABLES)
            p.add_argument("--values", required=True, help="comma-separated, increasing")
            p.add_argument("--blocker-length", type=float, default=5.0, help="mean, m")
            p.add_argument("--blocker-width", type=float, default=5.0, help="mean, m")

    p = sub.add_parser("reproduce", parents=[common], help="preset tables for the figures")
    p.add_argument("figure", help=", ".join(PRESETS))
    p.add_argument("--analytic-only", action="store_true")
    p.set_defaults(func=cmd_reproduce)
    return parser


def _write(table, args):
    text = table.to_json() if args.json else table.to_csv()
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.trials < 1 or args.threads < 1:
            raise InputError("--trials and --threads must be positive")
        table, mismatches = args.func(args)
    except (ConvergenceError, BracketError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except (InputError, ScenarioError, CatalogError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _write(table, args)
    for labels, metric, analytic, simulated in mismatches:
        where = ", ".join(f"{k}={v:g}" for k, v in labels.items()) or "scenario"
        print(f"mismatch at {where}: {metric} analytic={analytic:.6g} "
              f"montecarlo={simulated:.6g}", file=sys.stderr)
    if mismatches and args.strict:
        return EXIT_MISMATCH
    return EXIT_OK
