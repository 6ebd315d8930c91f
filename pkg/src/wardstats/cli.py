"""Command-line front end.

Every subcommand writes one JSON report to stdout::

    {"subcommand": ..., "inputs_digest": ..., "outputs": {...},
     "warnings": [...], "exit_code": 0}

Exit codes: 0 success, 1 domain error (invalid rows, degenerate input),
2 usage error. ``--pretty`` adds a human-readable table on stderr.
Floats are rounded to 6 significant digits unless ``--full-precision``;
infinities are written as the string ``"inf"``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import hashlib
import io
import json
import math
import os
import sys
import warnings
from pathlib import Path
from typing import Any

import numpy as np

from . import attribution, core, diagnostics, evidence, glm, rostersim, vitreous
from .core import WardStatsError

SUBCOMMANDS = ("ingest", "diagnose", "attribute", "risk-table", "glm", "bayes", "predict-k", "simulate")


@dataclasses.dataclass
class RunReport:
    subcommand: str
    inputs_digest: str
    outputs: Any
    warnings: list[str]
    exit_code: int

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


class _Context:
    def __init__(self, args: argparse.Namespace):
        # digest: subcommand, every flag that can change outputs, then file bytes as read
        self.args = args
        self.hasher = hashlib.sha256()
        self.warnings: list[str] = []
        self.pretty: list[str] = []
        self.hasher.update(args.command.encode())
        for key in sorted(vars(args)):
            if key in ("func", "pretty", "workers"):  # no effect on outputs
                continue
            self.hasher.update(f"|{key}={getattr(args, key)!r}".encode())

    def read(self, path: str) -> str:
        data = Path(path).read_bytes()
        self.hasher.update(data)
        return data.decode("utf-8")

    def show(self, text: str) -> None:
        self.pretty.append(text)


def _round(value, full: bool):
    if isinstance(value, dict):
        return {str(k): _round(v, full) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round(v, full) for v in value]
    if isinstance(value, np.ndarray):
        return _round(value.tolist(), full)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v if full else float(f"{v:.6g}")
    return value


def _hhmm(text: str) -> int:
    try:
        h, m = text.split(":")
        minutes = int(h) * 60 + int(m)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HH:MM, got {text!r}") from None
    if not 0 <= minutes <= 1440:
        raise argparse.ArgumentTypeError(f"time of day out of range: {text!r}")
    return minutes


def _probability(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"probability out of [0, 1]: {text}")
    return v


def _loaded(ctx: _Context, loader, path: str, what: str):
    result = loader(ctx.read(path))
    if result.errors:
        raise core.ParseError(result.errors, result.records)
    return result.records


# --- subcommands -------------------------------------------------------------

def cmd_ingest(ctx: _Context) -> dict:
    a = ctx.args
    out, errors = {}, False
    for name, path, loader in (("roster", a.roster, core.load_roster), ("deaths", a.deaths, core.load_deaths),
                               ("admissions", a.admissions, core.load_admissions)):
        if path is None:
            continue
        res = loader(ctx.read(path))
        out[name] = {"records": len(res.records), "errors": [e.as_dict() for e in res.errors]}
        errors |= bool(res.errors)
        out[name]["_records"] = res.records
    if a.admissions and a.deaths:
        problems = core.check_outcomes(out["admissions"]["_records"], out["deaths"]["_records"])
        out["outcome_mismatches"] = problems
        errors |= bool(problems)
    for v in out.values():
        if isinstance(v, dict):
            v.pop("_records", None)
    if not out:
        raise WardStatsError("nothing to ingest: pass --roster, --deaths and/or --admissions")
    for name, v in out.items():
        if isinstance(v, dict):
            ctx.show(f"{name}: {v['records']} valid, {len(v['errors'])} invalid")
            for e in v["errors"]:
                ctx.show(f"  line {e['line']} [{e['column']}]: {e['message']}")
    out["valid"] = not errors
    return out


def cmd_diagnose(ctx: _Context) -> dict:
    a = ctx.args
    deaths = _loaded(ctx, core.load_deaths, a.deaths, "deaths")
    if not deaths:
        raise core.EmptyInputError("death register is empty")
    hists = {
        "hour": diagnostics.deaths_by_hour(deaths),
        "minute": diagnostics.deaths_by_minute(deaths),
        "weekday": diagnostics.deaths_by_weekday(deaths),
        "month": diagnostics.deaths_by_month(deaths),
    }
    out: dict[str, Any] = {"n_deaths": len(deaths), "histograms": {k: h.as_dict() for k, h in hists.items()},
                           "heaping_index": diagnostics.heaping_index(deaths),
                           "midnight_spike": diagnostics.midnight_spike(deaths).as_dict()}
    ages = diagnostics.age_summary(deaths)
    out["age"] = ages.as_dict()
    ctx.show(diagnostics.render_histogram(hists["hour"], "hour", "deaths"))
    ctx.show(diagnostics.render_histogram(ages.decade_histogram, "Age", "Frequency", drop="trim"))
    if a.admissions:
        admissions = _loaded(ctx, core.load_admissions, a.admissions, "admissions")
        out["monthly"] = [dataclasses.asdict(r) for r in diagnostics.monthly_series(admissions, deaths)]
    if a.roster:
        roster = _loaded(ctx, core.load_roster, a.roster, "roster")
        split = a.split
        if split == "with/without" and not a.nurse:
            raise WardStatsError("--split with/without needs --nurse")
        tab = diagnostics.staffing_crosstab(roster, deaths, a.nurse, split, a.day_start, a.day_end)
        out["staffing"] = tab.as_dict()
        ctx.show(tab.render(a.nurse or "target"))
        if a.nurse:
            edges = diagnostics.shift_edge_histograms(roster, a.nurse)
            out["shift_edges"] = edges.as_dict()
            ctx.show(diagnostics.render_histogram(edges.start_target, "start of shift", drop="zeros"))
    if a.csv_dir:
        d = Path(a.csv_dir)
        d.mkdir(parents=True, exist_ok=True)
        for k, h in hists.items():
            (d / f"deaths_by_{k}.csv").write_text(h.to_csv(), encoding="utf-8")
        (d / "age_decades.csv").write_text(ages.decade_histogram.to_csv(), encoding="utf-8")
    return out


def _policy(a) -> attribution.AttributionPolicy:
    return attribution.AttributionPolicy(a.mode, a.handover, tie_same=not a.tie_opposite)


def cmd_attribute(ctx: _Context) -> dict:
    a = ctx.args
    roster = _loaded(ctx, core.load_roster, a.roster, "roster")
    deaths = _loaded(ctx, core.load_deaths, a.deaths, "deaths")
    policy = _policy(a)
    ids = a.nurse or core.nurses(roster)
    rows = []
    for n in ids:
        rows.append({"nurse": n,
                     "per_day": attribution.attribute_per_day(roster, deaths, n),
                     "per_presence": attribution.attribute_per_presence(roster, deaths, n, policy),
                     "hours_on_duty": attribution.hours_on_duty(roster, n)})
        ctx.show(f"{n}: per_day={rows[-1]['per_day']} per_presence={rows[-1]['per_presence']} "
                 f"hours={rows[-1]['hours_on_duty']:.1f}")
    return {"policy": dataclasses.asdict(policy), "nurses": rows}


def _counts_rows(text: str) -> list[attribution.RiskTableRow]:
    reader = csv.DictReader(io.StringIO(text))
    need = {"nurse", "same_zone", "opposite_zone", "hours_on_duty"}
    if reader.fieldnames is None or not need <= set(reader.fieldnames):
        raise WardStatsError("counts file needs columns nurse,same_zone,opposite_zone,hours_on_duty")
    rows = []
    for i, r in enumerate(reader, start=2):
        try:
            rows.append(attribution.zone_risk_row(int(r["same_zone"]), int(r["opposite_zone"]),
                                                  float(r["hours_on_duty"]), r["nurse"]))
        except ValueError as exc:
            raise WardStatsError(f"counts line {i}: {exc}") from None
    return rows


def cmd_risk_table(ctx: _Context) -> dict:
    a = ctx.args
    if a.counts:
        rows = _counts_rows(ctx.read(a.counts))
    else:
        if not (a.roster and a.deaths):
            raise WardStatsError("risk-table needs --counts, or --roster and --deaths")
        roster = _loaded(ctx, core.load_roster, a.roster, "roster")
        deaths = _loaded(ctx, core.load_deaths, a.deaths, "deaths")
        flt = attribution.similar_hours(roster, a.target, a.tolerance) if a.target else None
        rows = attribution.risk_table(roster, deaths, flt, _policy(a))
    table = attribution.risk_table_csv(rows)
    ctx.show(table)
    return {"rows": [r.as_dict() for r in rows], "csv": table}


def cmd_glm(ctx: _Context) -> dict:
    a = ctx.args
    admissions = _loaded(ctx, core.load_admissions, a.admissions, "admissions")
    roster = _loaded(ctx, core.load_roster, a.roster, "roster")
    deaths = _loaded(ctx, core.load_deaths, a.deaths, "deaths") if a.deaths else []
    fits, titles = {}, []
    for model in a.model:
        rows = glm.build_design(admissions, roster, a.nurse, model, deaths)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            fits[model] = glm.fit_design(rows)
        ctx.warnings += [f"{model}: {w.message}" for w in caught]
        if not fits[model].converged:
            ctx.warnings.append(f"{model}: IRLS did not converge")
        flagged = [k for k, v in fits[model].separation_flags.items() if v]
        if flagged:
            ctx.warnings.append(f"{model}: separation suspected for {', '.join(flagged)}")
        titles.append(f"Model {model.upper()}")
    table = glm.summarize(*fits.values(), titles=titles)
    ctx.show(table)
    return {"models": {m: f.as_dict() for m, f in fits.items()}, "table": table}


def cmd_bayes(ctx: _Context) -> dict:
    a = ctx.args
    model = evidence.EvidenceModel(a.prior, a.pe_hp, a.pe_hd)
    out = {"lr": evidence.likelihood_ratio(model), "prior": a.prior, "posterior": evidence.posterior(model)}
    if a.grid:
        grid = [float(v) for v in a.grid.split(",") if v.strip()]
        out["grid"] = evidence.prior_sensitivity(model, grid)
    ctx.show(f"LR = {out['lr']:.6g}; P(Hp) = {a.prior:.6g} -> P(Hp|E) = {out['posterior']:.6g}")
    return out


def cmd_predict_k(ctx: _Context) -> dict:
    a = ctx.args
    text = ctx.read(a.data)
    pts = []
    reader = csv.reader(io.StringIO(text))
    for i, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            pts.append((float(row[0]), float(row[1])))
        except (ValueError, IndexError):
            if i == 1:
                continue  # header
            raise WardStatsError(f"data line {i}: expected pmi,k") from None
    model = vitreous.fit_poly2(pts)
    levels = a.level or [0.95]
    intervals = [vitreous.predict_interval(model, a.pmi, lv) for lv in levels]
    ctx.show(vitreous.format_intervals(intervals))
    return {"model": model.as_dict(), "intervals": [pi.as_dict() for pi in intervals]}


def cmd_simulate(ctx: _Context) -> dict:
    a = ctx.args
    setup = rostersim.parse_config(ctx.read(a.config)) if a.config else \
        rostersim.SimulationSetup(*rostersim.morning_heavy_setup())
    seed = a.seed
    if seed is None and os.environ.get("CF_SEED"):
        seed = int(os.environ["CF_SEED"])
        ctx.hasher.update(f"|CF_SEED={seed}".encode())
    config = setup.config if seed is None else dataclasses.replace(setup.config, seed=seed)
    result = rostersim.run_null_experiment(config, setup.profiles, setup.intensity, setup.registration,
                                           reps=a.reps, workers=a.workers)
    if a.replicates_csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("rep", "nurse", "on_deaths", "off_deaths", "ratio"))
        for rep, nurse, on, off, r in result.replicate_rows():
            w.writerow((rep, nurse, on, off, "" if math.isnan(r) else f"{r:.10g}"))
        Path(a.replicates_csv).write_text(buf.getvalue(), encoding="utf-8")
    for n, s in result.summaries.items():
        ctx.show(f"{n:>18}: mean ratio {s.mean:.4f} (se {s.se:.4f}), analytic {s.expected:.4f}, "
                 f"excluded {s.n_excluded}")
    return {"seed": config.seed, "horizon_days": config.horizon_days, **result.as_dict()}


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pretty", action="store_true", help="also print a human-readable table on stderr")
    common.add_argument("--full-precision", action="store_true", help="do not round floats to 6 significant digits")

    p = argparse.ArgumentParser(prog="wardstats", description="Statistics for nurse-roster and ward mortality data.")
    sub = p.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    s = sub.add_parser("ingest", parents=[common], help="validate roster/deaths/admissions CSV files")
    s.add_argument("--roster", help="roster CSV (nurse_id,sector,clock_in,clock_out)")
    s.add_argument("--deaths", help="deaths CSV (patient_id,sector,registered_at,age_years)")
    s.add_argument("--admissions", help="admissions CSV (patient_id,sector,admit_date,discharge_date,age_years,died)")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("diagnose", parents=[common], help="time-of-death histograms and confounder diagnostics")
    s.add_argument("--deaths", required=True, help="deaths CSV")
    s.add_argument("--admissions", help="admissions CSV, adds the monthly admissions/deaths series")
    s.add_argument("--roster", help="roster CSV, adds the staffing cross-tab")
    s.add_argument("--nurse", help="target nurse for with/without splits and shift-edge histograms")
    s.add_argument("--split", choices=diagnostics.SPLITS, default="none", help="staffing cross-tab split")
    s.add_argument("--day-start", type=_hhmm, default=diagnostics.DAY_START, help="start of day period, HH:MM (07:00)")
    s.add_argument("--day-end", type=_hhmm, default=diagnostics.DAY_END, help="end of day period, HH:MM (21:00)")
    s.add_argument("--csv-dir", help="also write plot-ready label,count CSV files here")
    s.set_defaults(func=cmd_diagnose)

    def policy_flags(s):
        s.add_argument("--mode", choices=attribution.MODES, default="per_presence", help="attribution rule")
        s.add_argument("--handover", choices=attribution.HANDOVER_RULES, default="both",
                       help="which nurse gets deaths registered during a handover")
        s.add_argument("--tie-opposite", action="store_true",
                       help="per_day: a date worked in both zones counts deaths as opposite-zone")

    s = sub.add_parser("attribute", parents=[common], help="deaths per nurse under per-day and per-presence rules")
    s.add_argument("--roster", required=True, help="roster CSV")
    s.add_argument("--deaths", required=True, help="deaths CSV")
    s.add_argument("--nurse", action="append", help="nurse id (repeatable; default all)")
    policy_flags(s)
    s.set_defaults(func=cmd_attribute)

    s = sub.add_parser("risk-table", parents=[common], help="same/opposite zone relative and absolute risk")
    s.add_argument("--roster", help="roster CSV")
    s.add_argument("--deaths", help="deaths CSV")
    s.add_argument("--counts", help="CSV of precomputed nurse,same_zone,opposite_zone,hours_on_duty")
    s.add_argument("--target", help="keep only nurses with hours similar to this nurse")
    s.add_argument("--tolerance", type=float, default=0.10, help="relative hours tolerance for --target (0.10)")
    policy_flags(s)
    s.set_defaults(func=cmd_risk_table)

    s = sub.add_parser("glm", parents=[common], help="logistic regression of death on sector, times, age, present")
    s.add_argument("--admissions", required=True, help="admissions CSV")
    s.add_argument("--roster", required=True, help="roster CSV")
    s.add_argument("--deaths", help="deaths CSV (registration times for the present covariate)")
    s.add_argument("--nurse", required=True, help="target nurse")
    s.add_argument("--model", choices=("m1", "m2"), action="append",
                   help="m1: all admissions; m2: patients the nurse cared for (repeatable)")
    s.set_defaults(func=cmd_glm)

    s = sub.add_parser("bayes", parents=[common], help="posterior probability from prior and likelihoods")
    s.add_argument("--prior", type=_probability, required=True, help="prior probability of the prosecution hypothesis")
    s.add_argument("--pe-hp", type=_probability, required=True, help="P(evidence | prosecution hypothesis)")
    s.add_argument("--pe-hd", type=_probability, required=True, help="P(evidence | defence hypothesis)")
    s.add_argument("--grid", help="comma-separated priors for a sensitivity sweep")
    s.set_defaults(func=cmd_bayes)

    s = sub.add_parser("predict-k", parents=[common], help="quadratic K+ on PMI fit with prediction intervals")
    s.add_argument("--data", required=True, help="CSV of pmi,k pairs (header optional)")
    s.add_argument("--pmi", type=float, required=True, help="PMI (hours) to predict at")
    s.add_argument("--level", type=float, action="append", help="interval level, repeatable (0.95)")
    s.set_defaults(func=cmd_predict_k)

    s = sub.add_parser("simulate", parents=[common], help="null-model roster/death simulation")
    s.add_argument("--config", help="key = value simulation config (default: built-in morning-heavy ward)")
    s.add_argument("--reps", type=int, default=1000, help="number of replicates (1000)")
    s.add_argument("--seed", type=int, help="master seed (falls back to $CF_SEED, then the config)")
    s.add_argument("--workers", type=int, default=1, help="threads; results do not depend on this")
    s.add_argument("--replicates-csv", help="write per-replicate counts and ratios here")
    s.set_defaults(func=cmd_simulate)
    return p


def run(argv: list[str] | None = None) -> RunReport:
    """Parse ``argv`` and run one subcommand; usage errors raise SystemExit(2)."""
    args = build_parser().parse_args(argv)
    if args.command == "glm" and not args.model:
        args.model = ["m1"]
    if args.command == "predict-k" and args.level:
        for lv in args.level:
            if not 0.0 < lv < 1.0:
                build_parser().error("--level must lie strictly between 0 and 1")
    if args.command == "simulate" and args.reps < 0:
        build_parser().error("--reps must be non-negative")
    ctx = _Context(args)
    try:
        outputs, code = args.func(ctx), 0
        if isinstance(outputs, dict) and outputs.get("valid") is False:
            code = 1
    except (WardStatsError, OSError, ArithmeticError) as exc:
        outputs, code = {"error": str(exc)}, 1
        if isinstance(exc, core.ParseError):
            outputs["errors"] = [e.as_dict() for e in exc.errors]
    report = RunReport(args.command, ctx.hasher.hexdigest(), _round(outputs, args.full_precision),
                       ctx.warnings, code)
    report.pretty = ctx.pretty if args.pretty else []  # type: ignore[attr-defined]
    return report


def main(argv: list[str] | None = None) -> int:
    report = run(argv)
    for block in getattr(report, "pretty", []):
        sys.stderr.write(block if block.endswith("\n") else block + "\n")
    json.dump(report.as_dict(), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
