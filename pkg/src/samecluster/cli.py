"""Command-line harness: synth, budget, recovery, errors, classify, reduce-check."""

from __future__ import annotations

import argparse
import json
import sys

from .datasets import DatasetSpec, load, write_csv
from .harness import (
    ExperimentPlan,
    check_reducibility,
    run_classify_study,
    run_error_report,
    run_fixed_budget,
    run_fixed_recovery,
    write_records_json,
    write_table_csv,
)
from .synthgen import SynthConfig, generate

_SYNTH_KEYS = {
    "n": int, "K": int, "alpha": float, "sigma": float, "b": float,
    "d": int, "rho": float, "p": float, "seed": int,
}


def parse_synth(text: str) -> SynthConfig:
    """Parse 'n=10000,K=20,alpha=2.5,...' into a SynthConfig."""
    kwargs = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, _, value = part.partition("=")
        key = key.strip()
        if key not in _SYNTH_KEYS:
            raise ValueError(f"unknown synth parameter {key!r}")
        name = "p_collision" if key == "p" else key
        kwargs[name] = _SYNTH_KEYS[key](value.strip())
    return SynthConfig(**kwargs)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _add_shared(p: argparse.ArgumentParser):
    p.add_argument("--algo", default="uniform,basic,improved_simple",
                   help="comma-separated algorithm tags")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--heavy-threshold", type=int, default=10)
    p.add_argument("--reuse-samples", choices=("true", "false"), default="true")
    p.add_argument("--noise-p", type=float, default=0.0)
    p.add_argument("--draw-cap", type=int, default=10 ** 8)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dataset", help="labeled CSV (label in the last column)")
    p.add_argument("--synth", help="synthetic config, e.g. n=10000,K=20,alpha=2.5")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _plan_from_args(args, mode: str, budgets=(), targets=()) -> ExperimentPlan:
    synth = parse_synth(args.synth) if args.synth else None
    dataset = DatasetSpec(args.dataset) if args.dataset else None
    return ExperimentPlan(
        mode=mode,
        algorithms=[a.strip() for a in args.algo.split(",") if a.strip()],
        budgets=list(budgets),
        targets=list(targets),
        trials=args.trials,
        eps=args.eps,
        seed=args.seed,
        heavy_threshold=args.heavy_threshold,
        reuse_samples=args.reuse_samples == "true",
        noise_p=args.noise_p,
        draw_cap=args.draw_cap,
        synth=synth,
        dataset=dataset,
        workers=args.workers,
    )


def _emit(args, plan, records, table):
    if args.format == "json":
        write_records_json(args.out, plan, records)
    else:
        write_table_csv(args.out, table)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="samecluster",
        description="Cluster recovery with same-cluster queries: data "
                    "generation and query-complexity experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="emit a synthetic dataset CSV")
    p.add_argument("--synth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--header", action="store_true")

    p = sub.add_parser("budget", help="fixed-budget sweep")
    p.add_argument("--budgets", required=True, type=_int_list)
    _add_shared(p)

    p = sub.add_parser("recovery", help="fixed-recovery sweep")
    p.add_argument("--targets", required=True, type=_int_list)
    _add_shared(p)

    p = sub.add_parser("errors", help="centroid-error report (fixed recovery)")
    p.add_argument("--targets", required=True, type=_int_list)
    _add_shared(p)

    p = sub.add_parser("classify", help="queries-per-point classification study")
    p.add_argument("--targets", type=_int_list, default=[])
    p.add_argument("--budgets", type=_int_list, default=[])
    _add_shared(p)

    p = sub.add_parser("reduce-check", help="reducibility check on ground truth")
    p.add_argument("--dataset", required=True)
    p.add_argument("--recovered", required=True, type=_int_list,
                   help="comma-separated recovered truth labels")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--out")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except Exception as exc:  # noqa: BLE001 - machine-readable failure contract
        json.dump({"error": {"type": type(exc).__name__, "message": str(exc)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 1


def _dispatch(args) -> int:
    if args.command == "synth":
        cfg = parse_synth(args.synth)
        ps, _ = generate(cfg)
        write_csv(args.out, ps.points, ps.labels, header=args.header)
        return 0

    if args.command == "budget":
        plan = _plan_from_args(args, "fixed_budget", budgets=args.budgets)
        records, table = run_fixed_budget(plan)
        _emit(args, plan, records, table)
        return 0

    if args.command == "recovery":
        plan = _plan_from_args(args, "fixed_recovery", targets=args.targets)
        records, table = run_fixed_recovery(plan)
        _emit(args, plan, records, table)
        return 0

    if args.command == "errors":
        plan = _plan_from_args(args, "error_report", targets=args.targets)
        records, table = run_error_report(plan)
        _emit(args, plan, records, table)
        return 0

    if args.command == "classify":
        plan = _plan_from_args(args, "classify_study",
                               budgets=args.budgets, targets=args.targets)
        records = run_classify_study(plan)
        if args.format == "json":
            write_records_json(args.out, plan, records)
        else:
            rows = [{"algorithm": r.algorithm, "x": r.x,
                     "mean": r.correct_fraction, "sd": 0.0, "trials": 1,
                     "censored": 0} for r in records]
            write_table_csv(args.out, rows)
        return 0

    if args.command == "reduce-check":
        ps, mapping = load(DatasetSpec(args.dataset))
        label_of = {v: k for k, v in mapping.items()}
        ok, ratio, offender = check_reducibility(ps, args.recovered, args.eps)
        doc = {"reducible": ok, "worst_ratio": ratio,
               "offender": label_of.get(offender, offender)}
        text = json.dumps(doc, indent=1)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            print(text)
        return 0 if ok else 2

    raise ValueError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
