"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import io
from .encoding import EncodingError
from .experiments import (
    METHODS,
    GuidedModel,
    guided_simulation,
    parse_term,
    simulate,
    stability_experiment,
)
from .importance import soil_importance
from .procedure import EmptyDesign, coefficient_table, run_vibim
from .simgen import SCENARIOS
from .solvers import AllConstantDesign, fit_path

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4

RANDOMIZED = {"vibim", "simulate", "stability", "guided-sim"}


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="global seed (required for randomized commands)")
    common.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--format", choices=("json", "tsv"), default="json")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", required=True, help="CSV file")
    data.add_argument("--schema", required=True, help="YAML data schema")
    data.add_argument("--config", help="YAML procedure config")

    parser = argparse.ArgumentParser(prog="vibim", description="Interaction selection by variable importance.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("vibim", parents=[common, data], help="run the full procedure on a dataset")
    sub.add_parser("soil", parents=[common, data], help="main-effect importance only")

    fp = sub.add_parser("fit-path", parents=[common, data], help="dump one penalized path")
    fp.add_argument("--penalty", default="lasso", choices=("lasso", "scad", "mcp"))

    sm = sub.add_parser("simulate", parents=[common], help="F/G simulation study")
    sm.add_argument("--scenario", required=True)
    sm.add_argument("--n", type=int, default=200)
    sm.add_argument("--p", type=int, default=1000)
    sm.add_argument("--reps", type=int, default=100)
    sm.add_argument("--methods", type=_names, default=METHODS)
    sm.add_argument("--sizes", type=_ints, default=(5, 6, 7, 8, 9))
    sm.add_argument("--folds", type=int, default=10)
    sm.add_argument("--config", help="YAML procedure config")

    st = sub.add_parser("stability", parents=[common, data], help="PIVS/SIVS table")
    st.add_argument("--methods", type=_names, default=("vibim", "glasso", "gscad", "gmcp"))
    st.add_argument("--sizes", type=_ints, default=None, help="VIBIM model sizes (default: plausible window)")
    st.add_argument("--taus", type=_floats, default=(0.1, 0.2))
    st.add_argument("--fractions", type=_floats, default=(0.05, 0.1))
    st.add_argument("--reps", type=int, default=10)
    st.add_argument("--sigma", type=float, default=None, help="noise scale for PIVS")

    gs = sub.add_parser("guided-sim", parents=[common, data], help="guided simulation counts")
    gs.add_argument("--model", required=True, help="YAML generating model")
    gs.add_argument("--reps", type=int, default=200)
    gs.add_argument("--alpha", type=float, default=0.05)
    return parser


def _load(args):
    return io.load_dataset(args.data, io.read_schema(args.schema))


def _config(args):
    try:
        return io.read_config(getattr(args, "config", None))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad config: {exc}") from None


def _write(args, stem: str, obj=None, rows=None, columns=None, meta=None) -> list:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{stem}.{args.format}"
    if rows is not None:
        if args.format == "json":
            path.write_text(io.dumps_json({"kind": stem, "params": meta or {}, "rows": rows}), encoding="utf-8")
        else:
            io.write_table(path, rows, columns)
    else:
        io.write_report(obj, path, args.format)
    return [path]


def cmd_vibim(args) -> list:
    ds = _load(args)
    report = run_vibim(ds.design(), ds.response, _config(args))
    if args.format == "json":
        return _write(args, "vibim_report", obj=report)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_report(report.stage1_importance, out / "stage1_importance.tsv", "tsv")
    io.write_report(report.stage2_importance, out / "stage2_importance.tsv", "tsv")
    io.write_report(report, out / "nested_models.tsv", "tsv")
    paths = [out / n for n in ("stage1_importance.tsv", "stage2_importance.tsv", "nested_models.tsv")]
    for m in report.plausible_models:
        p = out / f"coefficients_s{m.size}.tsv"
        io.write_table(p, coefficient_table(report, m.size),
                       ("term", "estimate", "std_error", "t_value", "p_value"))
        paths.append(p)
    return paths


def cmd_soil(args) -> list:
    ds = _load(args)
    cfg = _config(args)
    imp, _ = soil_importance(ds.design().main_effects(), ds.response, cfg.psi, cfg.specs)
    return _write(args, "importance", obj=imp)


def cmd_fit_path(args) -> list:
    ds = _load(args)
    path = fit_path(ds.design(), ds.response, io.penalty_from_name(args.penalty))
    if args.format == "json":
        return _write(args, f"path_{args.penalty}", obj=path)
    rows = [{"index": k, "lambda": float(s.lam), "n_active": len(s.active_groups),
             "active_groups": sorted(s.active_groups), "converged": bool(s.converged),
             "iterations": int(s.iterations)} for k, s in enumerate(path.steps)]
    return _write(args, f"path_{args.penalty}", rows=rows,
                  columns=("index", "lambda", "n_active", "active_groups", "converged", "iterations"))


def cmd_simulate(args) -> list:
    if args.scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {args.scenario!r}; choose from {', '.join(sorted(SCENARIOS))}")
    unknown = set(args.methods) - set(METHODS)
    if unknown:
        raise UsageError(f"unknown methods: {sorted(unknown)}")
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    rows = simulate(args.scenario, args.n, args.p, args.reps, args.methods, args.sizes,
                    seed=args.seed, threads=args.threads, folds=args.folds, config=_config(args))
    meta = {"scenario": args.scenario, "n": args.n, "p": args.p, "reps": args.reps, "seed": args.seed}
    return _write(args, f"simulate_{args.scenario}", rows=rows, meta=meta,
                  columns=("method", "size", "reps", "f", "g", "f_mean", "f_se", "g_mean", "g_se"))


def cmd_stability(args) -> list:
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    unknown = set(args.methods) - set(METHODS) - {"constant"}
    if unknown:
        raise UsageError(f"unknown methods: {sorted(unknown)}")
    ds = _load(args)
    rows = stability_experiment(ds.design(), ds.response, args.methods, args.sizes, args.taus,
                                args.fractions, args.reps, args.seed, args.sigma, args.threads,
                                _config(args))
    columns = ["method"] + [k for k in rows[0] if k != "method" and not k.endswith("failures")]
    meta = {"taus": list(args.taus), "fractions": list(args.fractions), "reps": args.reps, "seed": args.seed}
    return _write(args, "stability", rows=rows, columns=columns, meta=meta)


def cmd_guided(args) -> list:
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    ds = _load(args)
    with open(args.model, encoding="utf-8") as fh:
        spec = yaml.safe_load(fh)
    try:
        model = GuidedModel.from_mapping(spec)
        for term in model.terms:
            parse_term(term, ds.schema)
    except (KeyError, TypeError, ValueError) as exc:
        raise io.DataError(f"bad model file {args.model}: {exc}") from None
    rows = guided_simulation(ds.schema, ds.raw, ds.response, model, args.reps, args.seed,
                             args.alpha, args.threads, _config(args))
    meta = {"terms": list(model.terms), "designated": list(model.designated), "reps": args.reps,
            "alpha": args.alpha, "seed": args.seed}
    return _write(args, "guided", rows=rows, columns=("model", "size", "reps", "count", "sigma"), meta=meta)


COMMANDS = {
    "vibim": cmd_vibim,
    "soil": cmd_soil,
    "fit-path": cmd_fit_path,
    "simulate": cmd_simulate,
    "stability": cmd_stability,
    "guided-sim": cmd_guided,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command in RANDOMIZED and args.seed is None:
        print(f"vibim {args.command}: --seed is required", file=sys.stderr)
        return EXIT_USAGE
    if args.threads is None:
        args.threads = os.cpu_count() or 1
    if args.seed is None:
        args.seed = 0
    try:
        paths = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"vibim {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.DataError, EncodingError, EmptyDesign, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"vibim {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (AllConstantDesign, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        print(f"vibim {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
