"""Command-line front end.

Five subcommands: simulate, prevalence-ci, mean-ci, coverage-study, and
calibrate-report. A JSON config file can supply defaults for any flag of
the chosen subcommand; explicit flags win. Exit codes: 0 success, 2
validation problem, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import warnings

import numpy as np

from .bootstrap import (
    BootstrapConfig,
    CLASSIFIER_MODES,
    INTERVAL_KINDS,
    SHIFT_METHODS,
    SHIFT_MODES,
    bootstrap_mean_ci_lmm,
    bootstrap_mean_ci_mixture,
    bootstrap_prevalence_ci,
)
from .classifier import calibration_table, fit_classifier, predict_proba
from .data import load_dataset, save_dataset, split_by_group
from .exceptions import DataError, FitError
from .lmm import threshold_class_mean, weighted_class_mean
from .mixture import component_curves, fit_hier_gmm
from .report import (
    StageTimer,
    build_report,
    dump_json,
    summarize_replicates,
    write_coverage_csv,
)
from .shift import (
    clip_probs,
    corrected_probs_by_condition,
    estimate_prevalence_discretization,
    estimate_prevalence_fixed_point,
    naive_prevalence,
)
from .simulate import (
    METHODS,
    ScenarioSpec,
    coverage_study,
    generate_scenario,
    scenario_truth,
)

MEAN_METHODS = ("lmm", "lmm-labeldep", "lmm-labeldep-calibrated", "mixture")


def _common_flags(p):
    p.add_argument("--config", help="JSON file supplying defaults for these flags")
    p.add_argument("--seed", type=int, default=0, help="master seed (recorded in output)")
    p.add_argument("--threads", type=int, default=1, help="parallel bootstrap workers")
    p.add_argument("--output", help="write the JSON report to this path instead of stdout")
    p.add_argument("--verbose", action="store_true")


def _bootstrap_flags(p):
    p.add_argument("--B", type=int, default=200, help="bootstrap replicates")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--interval-kind", choices=INTERVAL_KINDS, default="pivotal")
    p.add_argument("--classifier-mode", choices=CLASSIFIER_MODES,
                   default="posterior_sample")
    p.add_argument("--shift-method", choices=SHIFT_METHODS, default="fixed_point")
    p.add_argument("--shift-mode", choices=SHIFT_MODES, default="label_shift")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="probability cut for the discretization estimator")
    p.add_argument("--grid-size", type=int, default=2000,
                   help="fixed-point search grid points")
    p.add_argument("--include-replicates", action="store_true",
                   help="embed the full replicate vector in the report")


def _scenario_flags(p):
    p.add_argument("--scenario", type=str.lower, choices=("s1", "s2", "s3"),
                   required=True)
    p.add_argument("--skew", action="store_true", help="use the skewed feature laws")
    p.add_argument("--label-dependent", action="store_true",
                   help="draw separate group effects per class")
    p.add_argument("--m", type=int, default=1000, help="training records")
    p.add_argument("--n", type=int, default=3000, help="test records")
    p.add_argument("--n-groups", type=int, default=15)
    p.add_argument("--train-prevalence", type=float, default=0.2)
    p.add_argument("--test-prevalence", type=float, default=0.4)
    p.add_argument("--re-sd", type=float, default=math.sqrt(0.5))
    p.add_argument("--noise-sd", type=float, default=math.sqrt(0.2))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="shiftboot",
        description="Prevalence and class-mean inference from classifier "
                    "predictions under label shift.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic (train, test, truth) triple")
    _common_flags(p)
    _scenario_flags(p)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--force", action="store_true", help="overwrite existing files")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prevalence-ci",
                       help="bootstrap CIs for per-condition prevalence, both estimators")
    _common_flags(p)
    _bootstrap_flags(p)
    p.add_argument("--train", required=True, help="labeled training CSV")
    p.add_argument("--test", required=True, help="test CSV")
    p.add_argument("--penalty", type=float, default=None,
                   help="fixed classifier penalty weight (default: grid-selected)")
    p.set_defaults(func=cmd_prevalence_ci)

    p = sub.add_parser("mean-ci", help="bootstrap CI for the class-1 mean of x")
    _common_flags(p)
    _bootstrap_flags(p)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--method", required=True, choices=MEAN_METHODS)
    p.add_argument("--penalty", type=float, default=None)
    p.add_argument("--curves-out", default=None,
                   help="CSV of fitted per-group component curves (mixture only)")
    p.set_defaults(func=cmd_mean_ci)

    p = sub.add_parser("coverage-study",
                       help="empirical interval coverage over regenerated pairs")
    _common_flags(p)
    _scenario_flags(p)
    _bootstrap_flags(p)
    p.add_argument("--methods", default="prevalence,lmm,mixture",
                   help=f"comma-separated subset of {', '.join(METHODS)}")
    p.add_argument("--R", type=int, default=200, help="simulated (train, test) pairs")
    p.add_argument("--out-prefix", default="coverage",
                   help="writes <prefix>.csv and <prefix>.json")
    p.set_defaults(func=cmd_coverage_study)

    p = sub.add_parser("calibrate-report",
                       help="binned calibration of raw vs corrected predictions")
    _common_flags(p)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--validation", default=None,
                   help="labeled CSV from the training distribution "
                        "(default: group holdout from --train)")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--shift-method", choices=SHIFT_METHODS, default="fixed_point")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--grid-size", type=int, default=2000)
    p.set_defaults(func=cmd_calibrate_report)

    return parser


def _apply_config_file(args, argv):
    """Merge config-file defaults under explicitly passed flags."""
    if not getattr(args, "config", None):
        return
    with open(args.config) as fh:
        loaded = json.load(fh)
    if not isinstance(loaded, dict):
        raise DataError("config file must hold a JSON object of flag defaults")
    provided = set()
    for tok in argv:
        if tok.startswith("--"):
            provided.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    for key, value in loaded.items():
        attr = key.replace("-", "_")
        if attr == "config" or attr in provided:
            continue
        if hasattr(args, attr):
            setattr(args, attr, value)
        else:
            warnings.warn(f"config key {key!r} does not apply to this command; ignored")


def _resolved_config(args):
    skip = {"func", "config", "output", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _bootstrap_config(args, shift_method=None):
    return BootstrapConfig(
        B=args.B,
        level=args.level,
        interval_kind=args.interval_kind,
        classifier_mode=args.classifier_mode,
        seed=args.seed,
        shift_method=shift_method or args.shift_method,
        shift_mode=args.shift_mode,
        threshold=args.threshold,
        grid_size=args.grid_size,
        workers=args.threads,
    )


def _scenario_spec(args):
    return ScenarioSpec(
        scenario=args.scenario,
        normal=not args.skew,
        label_dependent_re=args.label_dependent,
        m=args.m,
        n=args.n,
        n_groups=args.n_groups,
        train_prevalence=args.train_prevalence,
        test_prevalence=args.test_prevalence,
        re_sd=args.re_sd,
        noise_sd=args.noise_sd,
        seed=args.seed,
    )


def _fit_model(train, args):
    rule = "grid" if getattr(args, "penalty", None) is None else args.penalty
    return fit_classifier(train, lambda_rule=rule)


def _shift_estimate(model, train, test, args):
    if getattr(args, "shift_mode", "label_shift") == "none":
        return naive_prevalence(model, test)
    if args.shift_method == "discretization":
        return estimate_prevalence_discretization(model, train, test, args.threshold)
    return estimate_prevalence_fixed_point(model, test,
                                           grid_size=args.grid_size)


def _result_payload(res, args):
    doc = {
        "point": res.point,
        "interval": list(res.interval),
        "n_failed": res.n_failed,
        "replicates": summarize_replicates(res.replicates),
    }
    if args.include_replicates:
        doc["replicate_values"] = res.replicates
    return doc


def _emit(doc, args):
    text = dump_json(doc)
    if args.output:
        dump_json(doc, args.output)
        if args.verbose:
            print(f"wrote {args.output}", file=sys.stderr)
    else:
        sys.stdout.write(text)


# -- subcommands ---------------------------------------------------------

def cmd_simulate(args):
    spec = _scenario_spec(args)
    os.makedirs(args.out_dir, exist_ok=True)
    paths = {name: os.path.join(args.out_dir, name)
             for name in ("train.csv", "test.csv", "truth.json")}
    if not args.force:
        existing = [p for p in paths.values() if os.path.exists(p)]
        if existing:
            raise DataError(
                f"refusing to overwrite {existing}; pass --force to replace"
            )
    train, test, truth = generate_scenario(spec)
    save_dataset(train, paths["train.csv"])
    save_dataset(test, paths["test.csv"])
    dump_json({
        "version": "shiftboot-data 1",
        "spec": dataclasses.asdict(spec),
        "truth": truth,
    }, paths["truth.json"])
    for p in paths.values():
        print(p)
    return 0


def cmd_prevalence_ci(args):
    timer = StageTimer()
    with timer.stage("load"):
        train = load_dataset(args.train, role="training")
        test = load_dataset(args.test, role="test")
    with timer.stage("fit_classifier"):
        model = _fit_model(train, args)
    methods = ("none",) if args.shift_mode == "none" \
        else ("discretization", "fixed_point")
    runs = []
    with timer.stage("bootstrap"):
        for method in methods:
            cfg = _bootstrap_config(
                args, shift_method=None if method == "none" else method
            )
            for c in test.conditions:
                res = bootstrap_prevalence_ci(train, test, c, model, cfg)
                entry = {"shift_method": method, "condition": c}
                entry.update(_result_payload(res, args))
                runs.append(entry)
    doc = build_report("prevalence-ci", _resolved_config(args), {
        "train_prevalence": model.train_prevalence,
        "runs": runs,
    }, timer)
    _emit(doc, args)
    return 0


def _class_mean_table(test, a_raw, a_l, h):
    """Weighted and thresholded class means under raw and corrected
    probabilities; cells are None where a class has no mass."""
    x = np.asarray(test.x, dtype=np.float64)

    def weighted(p):
        out = {}
        for cls, w in ((1, p), (0, 1.0 - p)):
            try:
                out[cls] = weighted_class_mean(x, w)
            except DataError:
                out[cls] = None
        return out

    def thresholded(p):
        out = {}
        try:
            out[1] = threshold_class_mean(x, p, h)
        except DataError:
            out[1] = None
        low = p <= h
        out[0] = float(x[low].mean()) if low.any() else None
        return out

    return {
        "weighted": {"raw": weighted(a_raw), "corrected": weighted(a_l)},
        "threshold": {"raw": thresholded(a_raw), "corrected": thresholded(a_l)},
    }


def cmd_mean_ci(args):
    timer = StageTimer()
    with timer.stage("load"):
        train = load_dataset(args.train, role="training")
        test = load_dataset(args.test, role="test")
    if test.x is None:
        raise DataError("mean-ci needs an x column on the test data")
    with timer.stage("fit_classifier"):
        model = _fit_model(train, args)
    cfg = _bootstrap_config(args)
    with timer.stage("bootstrap"):
        if args.method == "mixture":
            res = bootstrap_mean_ci_mixture(train, test, model, cfg)
        else:
            res = bootstrap_mean_ci_lmm(
                train, test, model, cfg,
                label_dependent=args.method != "lmm",
                variance_calibration=args.method == "lmm-labeldep-calibrated",
            )
    with timer.stage("summaries"):
        shift = _shift_estimate(model, train, test, args)
        a_raw = clip_probs(np.atleast_1d(predict_proba(model, test.z)))
        a_l = corrected_probs_by_condition(a_raw, test.c, shift)
        table = _class_mean_table(test, a_raw, a_l, args.threshold)
        if args.method == "mixture" and args.curves_out:
            mixing = {c: shift.prevalence_for(c) for c in test.conditions}
            fit = fit_hier_gmm(test, mixing, init=a_l, restarts=cfg.restarts)
            component_curves(fit, test).to_csv(args.curves_out, index=False)

    payload = {
        "method": args.method,
        "shift": {
            "method": shift.method,
            "prevalence": shift.prevalence,
            "train_prevalence": shift.train_prevalence,
        },
        "class_means": table,
    }
    payload.update(_result_payload(res, args))
    if args.method == "lmm-labeldep-calibrated":
        payload["omega2_raw"] = res.diagnostics["omega2"]
        payload["omega2_adjusted"] = res.diagnostics["omega2_adjusted"]
        payload["pass1_interval"] = list(res.diagnostics["pass1"]["interval"])
    elif "omega2" in res.diagnostics:
        payload["omega2"] = res.diagnostics["omega2"]
    doc = build_report("mean-ci", _resolved_config(args), payload, timer)
    _emit(doc, args)
    return 0


def cmd_coverage_study(args):
    timer = StageTimer()
    spec = _scenario_spec(args)
    cfg = _bootstrap_config(args)
    methods = [tok.strip() for tok in args.methods.split(",") if tok.strip()]
    with timer.stage("study"):
        report = coverage_study(spec, methods, args.R, cfg)
    csv_path = args.out_prefix + ".csv"
    json_path = args.out_prefix + ".json"
    write_coverage_csv(report, csv_path)
    doc = build_report("coverage-study", _resolved_config(args), {
        "truth": scenario_truth(spec),
        "rows": report.rows(),
        "meta": report.meta,
    }, timer)
    dump_json(doc, json_path)
    print(csv_path)
    print(json_path)
    if args.output:
        dump_json(doc, args.output)
    return 0


def _table_doc(table):
    return {
        "edges": table.edges,
        "mean_predicted": table.mean_predicted,
        "observed_rate": table.observed_rate,
        "count": table.count,
        "max_gap": table.max_gap(),
    }


def cmd_calibrate_report(args):
    timer = StageTimer()
    with timer.stage("load"):
        train = load_dataset(args.train, role="training")
        test = load_dataset(args.test, role="test")
    if test.y is None:
        raise DataError("calibration report needs labeled test data")

    with timer.stage("fit_classifier"):
        if args.validation:
            fit_train = train
            val = load_dataset(args.validation, role="validation")
            if val.y is None:
                raise DataError("validation data must be labeled")
        elif len(train.groups) >= 2:
            fit_train, val = split_by_group(train, train.groups[::5])
        else:
            mask = np.arange(len(train)) % 5 == 0
            fit_train, val = train.take(~mask), train.take(mask)
        model = fit_classifier(fit_train)

    with timer.stage("tables"):
        p_val = np.atleast_1d(predict_proba(model, val.z))
        val_table = calibration_table(p_val, val.y, args.bins)
        a_raw = np.atleast_1d(predict_proba(model, test.z))
        raw_table = calibration_table(a_raw, test.y, args.bins)
        shift = _shift_estimate(model, fit_train, test, args)
        a_l = corrected_probs_by_condition(a_raw, test.c, shift)
        corrected_table = calibration_table(a_l, test.y, args.bins)

    doc = build_report("calibrate-report", _resolved_config(args), {
        "validation": _table_doc(val_table),
        "test_raw": _table_doc(raw_table),
        "test_corrected": _table_doc(corrected_table),
        "max_gap": {
            "validation": val_table.max_gap(),
            "test_raw": raw_table.max_gap(),
            "test_corrected": corrected_table.max_gap(),
            "corrected_improves": corrected_table.max_gap() < raw_table.max_gap(),
        },
        "shift": {"method": shift.method, "prevalence": shift.prevalence},
    }, timer)
    _emit(doc, args)
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, argv)
        return args.func(args)
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as err:
        print(f"error: invalid JSON config: {err}", file=sys.stderr)
        return 2
    except FitError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
