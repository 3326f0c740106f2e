"""Command-line interface: ``vote-dynamics {simulate,fit,predict,eval,digg-time}``.

Settings come from an optional JSON ``--config`` file; explicit flags
override it and unknown keys are rejected. Exit codes: 0 success, 2 usage or
input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from collections import Counter
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .core import DIGG_HOUR_VOTES, InputError, TimeUnit, build_activity_clock, story_to_digg_time
from .dynamics import IntegrationError
from .estimate.activity import fit_activity_zero_truncated
from .estimate.likelihood import fit_site_params, fit_story_interest
from .estimate.promotion import fit_promotion
from .estimate.results import LognormalPrior
from .estimate.stats import fit_lognormal, ks_bootstrap_gof, permutation_corr_test, safe_corr, spearman
from .params import GlobalParamsV2
from .predict import (
    PredictionConfig,
    comparison_grid,
    compare_error_rates,
    early_fan_fraction_curve,
    predict_corpus,
)
from .simulate import SimConfig, make_corpus

log = logging.getLogger("vote_dynamics")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

# settings accepted per subcommand (config-file keys) with their defaults
DEFAULTS = {
    "simulate": {"simulation": None, "seed": None, "jobs": 1, "out": "corpus.jsonl", "truth": None},
    "fit": {"input": None, "fan_graph": None, "stories": None, "clock": None, "initial_params": None,
            "window": None, "jobs": 1, "out": "fit.json", "n_boot": 200, "n_perm": 2000, "seed": 0,
            "fit_site": True},
    "predict": {"input": None, "params": None, "clock": None, "window": 10, "t_final": 72.0,
                "threshold": 500, "prior": False, "equal_r": False, "fan_prior": None, "nonfan_prior": None,
                "jobs": 1, "out": "predictions"},
    "eval": {"input": None, "params": None, "clock": None, "windows": [10, 216], "t_final": 72.0,
             "threshold": 500, "prior": False, "seed": 0, "calibration_fraction": 1 / 3, "n_boot": 2000,
             "promoted_only": False, "jobs": 1, "out": "evaluation"},
    "digg-time": {"input": None, "votes_per_digg_hour": DIGG_HOUR_VOTES, "apply": None, "apply_out": None,
                  "out": "clock.json"},
}


def _setup_logging():
    level = os.environ.get("VOTE_DYNAMICS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def resolve_settings(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and explicit flags (flags win)."""
    settings = dict(DEFAULTS[command])
    if getattr(args, "config", None):
        cfg = io.read_json(args.config)
        if not isinstance(cfg, dict):
            raise InputError("config file must hold a JSON object")
        unknown = set(cfg) - set(settings)
        if unknown:
            raise InputError(f"unknown config key(s) for {command}: {sorted(unknown)}")
        settings.update(cfg)
    for key in settings:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    return settings


def _load_corpus(s: dict, require_digg: bool = True) -> list:
    if not s.get("input"):
        raise InputError("an input vote file is required (--input)")
    records = io.read_corpus(s["input"], s.get("fan_graph"), s.get("stories"))
    if s.get("clock"):
        clock = io.read_clock(s["clock"])
        records = [story_to_digg_time(r, clock) for r in records]
    if require_digg and any(r.time_unit != TimeUnit.DIGG for r in records):
        raise InputError("votes are in wall time; pass an activity clock with --clock")
    return records


def _load_params(s: dict) -> GlobalParamsV2:
    if not s.get("params"):
        raise InputError("a fitted-parameter file is required (--params)")
    obj = io.read_json(s["params"], io.FIT_SCHEMA)
    try:
        return GlobalParamsV2.from_dict(obj["global_params"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"{s['params']}: malformed global_params") from exc


# -- subcommands ----------------------------------------------------------------------


def cmd_simulate(s: dict) -> int:
    sim = dict(s["simulation"] or {})
    if s["seed"] is not None:
        sim["seed"] = int(s["seed"])
    config = SimConfig.from_dict(sim)
    records, params = make_corpus(config, n_jobs=int(s["jobs"]))
    out = Path(s["out"])
    truth = Path(s["truth"]) if s["truth"] else out.with_name(out.stem + ".truth.json")
    io.write_corpus(out, records)
    io.write_truth(truth, records, params, config.to_dict())
    log.info("wrote %d stories to %s and ground truth to %s", len(records), out, truth)
    return EXIT_OK


def _user_histogram(records) -> np.ndarray:
    counts = Counter(v.voter_id for r in records for v in r.votes)
    return np.bincount(np.fromiter(counts.values(), dtype=int)) if counts else np.zeros(2)


def _lognormal_summary(values, n_boot, seed) -> dict:
    values = np.asarray(values, dtype=float)
    values = values[values > 0]
    if values.size < 3:
        return {"n": int(values.size), "message": "too few positive values"}
    fit = fit_lognormal(values)
    out = {"n": int(values.size), "mu": fit["mu"], "sigma": fit["sigma"], "converged": fit.converged}
    if fit.converged:
        out["ks_p_value"] = ks_bootstrap_gof(values, "lognormal", n_boot, seed)
    return out


def cmd_fit(s: dict) -> int:
    records = _load_corpus(s)
    g = GlobalParamsV2.from_dict(s["initial_params"]) if s["initial_params"] else GlobalParamsV2.reference()
    report = {"schema": io.FIT_SCHEMA, "version": io.SCHEMA_VERSION, "n_stories": len(records)}
    window = s["window"]
    if s["fit_site"]:
        if len(records) < 2:
            log.warning("a single story cannot pin the site-wide parameters")
        g, vis, rho = fit_site_params(records, g, window)
        report["visibility_fit"] = vis.as_dict()
        report["rho_fit"] = rho.as_dict()
    promo_records = [r for r in records if r.n_votes >= 2]
    try:
        model, pres = fit_promotion(promo_records, g.lifetime)
        report["promotion_fit"] = pres.as_dict()
        if model is not None and pres.converged:
            g = g.with_(promotion=model)
    except InputError as exc:
        report["promotion_fit"] = {"converged": False, "message": str(exc)}
    hist = _user_histogram(records)
    try:
        act = fit_activity_zero_truncated(hist)
        report["activity_fit"] = act.as_dict()
    except InputError as exc:
        report["activity_fit"] = {"converged": False, "message": str(exc)}
    report["global_params"] = g.to_dict()

    fits = [fit_story_interest(r, g, vote_window=window) for r in records]
    report["stories"] = [{"story_id": r.story_id, "S": r.submitter_fans, "n_votes": r.n_votes,
                          **{k: v["estimate"] for k, v in f.as_dict()["parameters"].items()},
                          "stderr": {k: v["stderr"] for k, v in f.as_dict()["parameters"].items()},
                          "converged": f.converged} for r, f in zip(records, fits)]
    rf = np.array([f["r_fan"] for f in fits])
    rn = np.array([f["r_nonfan"] for f in fits])
    report["interest_distribution"] = {
        "r_fan": _lognormal_summary(rf, int(s["n_boot"]), s["seed"]),
        "r_nonfan": _lognormal_summary(rn, int(s["n_boot"]), s["seed"]),
        "n_zero_r_fan": int(np.sum(rf == 0)),
    }
    S = np.array([r.submitter_fans for r in records], dtype=float)
    diag = {}
    for name, r in (("r_fan", rf), ("r_nonfan", rn)):
        try:
            pr, p = permutation_corr_test(S, r, int(s["n_perm"]), s["seed"])
        except InputError:
            pr = p = None
        diag[f"S_vs_{name}"] = {"pearson": pr, "p_value": p, "spearman": safe_corr(spearman, S, r)}
    report["diagnostics"] = diag
    io.write_json(s["out"], report)
    return EXIT_OK


def _prediction_config(s: dict, window) -> PredictionConfig:
    kw = {}
    if s.get("fan_prior"):
        kw["fan_prior"] = LognormalPrior(**s["fan_prior"])
    if s.get("nonfan_prior"):
        kw["nonfan_prior"] = LognormalPrior(**s["nonfan_prior"])
    return PredictionConfig(window, float(s["t_final"]), int(s["threshold"]), bool(s["prior"]),
                            bool(s.get("equal_r", False)), **kw)


def cmd_predict(s: dict) -> int:
    g = _load_params(s)
    records = _load_corpus(s)
    cfg = _prediction_config(s, s["window"])
    preds = predict_corpus(records, g, cfg, int(s["jobs"]))
    rows = []
    for rec, p in zip(records, preds):
        rows.append({"story_id": p.story_id, "available": p.available,
                     "predicted_final": p.predicted_final if p.available else None,
                     "predicted_class": bool(p.available and p.predicted_final >= cfg.popularity_threshold),
                     "predicted_promotion_time": p.predicted_promotion_time,
                     "r_fan": p.r_fan, "r_nonfan": p.r_nonfan, "message": p.message,
                     "actual_final": rec.final_votes})
    out = Path(s["out"])
    io.write_json(out.with_suffix(".json"), {"schema": io.REPORT_SCHEMA, "version": io.SCHEMA_VERSION,
                                             "kind": "predictions", "config": cfg.to_dict(), "stories": rows})
    cols = ["story_id", "available", "predicted_final", "predicted_class", "predicted_promotion_time",
            "r_fan", "r_nonfan", "actual_final"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join("" if r[c] is None or (isinstance(r[c], float) and not math.isfinite(r[c]))
                              else str(r[c]) for c in cols))
    io.atomic_write(out.with_suffix(".csv"), "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_eval(s: dict) -> int:
    g = _load_params(s)
    records = _load_corpus(s)
    if s["promoted_only"]:
        records = [r for r in records if r.promoted]
    if not records:
        raise InputError("no stories to evaluate")
    windows = [int(w) for w in s["windows"]]
    grid = comparison_grid(records, g, windows, float(s["t_final"]), int(s["threshold"]), bool(s["prior"]),
                           float(s["calibration_fraction"]), int(s["seed"]), int(s["jobs"]))
    out = Path(s["out"])
    summary = {"schema": io.REPORT_SCHEMA, "version": io.SCHEMA_VERSION, "kind": "evaluation", "grid": {}}
    csv_lines = ["window,method,story_id,predicted_final,predicted_class,available,actual_final,actual_class"]
    for w, methods in grid.items():
        summary["grid"][str(w)] = {m: rep.summary() for m, rep in methods.items()}
        d, e, x = methods["distinct_r"], methods["equal_r"], methods["extrapolation"]
        summary["grid"][str(w)]["bootstrap"] = {
            "distinct_vs_equal": dict(zip(("gap", "p_value"), compare_error_rates(d, e, int(s["n_boot"]), s["seed"]))),
            "equal_vs_extrapolation": dict(zip(("gap", "p_value"),
                                               compare_error_rates(e, x, int(s["n_boot"]), s["seed"]))),
        }
        for m, rep in methods.items():
            for row in rep.rows():
                csv_lines.append(",".join(str(v) if v is not None else "" for v in
                                          (w, m, row["story_id"], row["predicted_final"], row["predicted_class"],
                                           row["available"], row["actual_final"], row["actual_class"])))
    eligible = [r for r in records if r.n_votes >= 10]
    if len(eligible) >= 3:
        curve = early_fan_fraction_curve(eligible, g)
        summary["fan_fraction"] = curve.to_dict()
        io.atomic_write(out.with_name(out.name + "_fan_fraction.csv"), curve.to_csv())
    io.write_json(out.with_suffix(".json"), summary)
    io.atomic_write(out.with_suffix(".csv"), "\n".join(csv_lines) + "\n")
    return EXIT_OK


def cmd_digg_time(s: dict) -> int:
    if not s.get("input"):
        raise InputError("an input vote stream is required (--input)")
    times = io.read_event_times(s["input"])
    clock = build_activity_clock(times, float(s["votes_per_digg_hour"]))
    io.write_clock(s["out"], clock)
    if s.get("apply"):
        records = io.read_corpus(s["apply"])
        target = s.get("apply_out") or str(Path(s["apply"]).with_suffix("")) + ".digg.jsonl"
        io.write_corpus(target, [story_to_digg_time(r, clock) for r in records])
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict, "eval": cmd_eval,
            "digg-time": cmd_digg_time}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vote-dynamics", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, jobs=True):
        sp.add_argument("--config", help="JSON settings file")
        sp.add_argument("--out", help="output path")
        if jobs:
            sp.add_argument("--jobs", type=int, help="parallel workers")

    sp = sub.add_parser("simulate", help="generate a synthetic corpus and its ground truth")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--truth", help="ground-truth sidecar path (default: <out>.truth.json)")

    sp = sub.add_parser("fit", help="fit site-wide and per-story parameters to a vote stream")
    common(sp)
    sp.add_argument("--input")
    sp.add_argument("--fan-graph", dest="fan_graph")
    sp.add_argument("--stories", help="CSV of story metadata for CSV vote streams")
    sp.add_argument("--clock", help="activity clock JSON for wall-time input")
    sp.add_argument("--window", type=int)
    sp.add_argument("--seed", type=int)

    for name, helptext in (("predict", "forecast final votes from early votes"),
                           ("eval", "compare predictors on stories with known outcomes")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--input")
        sp.add_argument("--params", help="fitted-parameter JSON from `fit`")
        sp.add_argument("--clock")
        sp.add_argument("--t-final", dest="t_final", type=float)
        sp.add_argument("--threshold", type=int)
        sp.add_argument("--prior", dest="prior", action="store_true", default=None)
        sp.add_argument("--no-prior", dest="prior", action="store_false")
        if name == "predict":
            sp.add_argument("--window", type=int)
            sp.add_argument("--equal-r", dest="equal_r", action="store_true", default=None)
        else:
            sp.add_argument("--window", dest="windows", type=int, action="append")
            sp.add_argument("--seed", type=int)

    sp = sub.add_parser("digg-time", help="build an activity clock from a vote stream")
    common(sp, jobs=False)
    sp.add_argument("--input")
    sp.add_argument("--votes-per-digg-hour", dest="votes_per_digg_hour", type=float)
    sp.add_argument("--apply", help="corpus to convert to Digg time")
    sp.add_argument("--apply-out", dest="apply_out")
    return p


def main(argv: Optional[list] = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = resolve_settings(args.command, args)
        return COMMANDS[args.command](settings)
    except (IntegrationError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"vote-dynamics {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"vote-dynamics {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT

if __name__ == "__main__":
    sys.exit(main())
