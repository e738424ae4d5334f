"""Command line front end: run, validate, and list the bundled experiments."""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    EXPERIMENT_IDS,
    EXPERIMENT_DESCRIPTIONS,
    emit_plotdata,
    load_spec,
    run_experiment,
)


def _cmd_run(args):
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    if args.draws is not None:
        spec.draws = args.draws
    if args.out is not None:
        spec.out_dir = args.out
    summary = run_experiment(spec, threads=args.threads)
    if args.plotdata:
        summary["plotdata"] = emit_plotdata(summary["csv"])
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def _cmd_list(_args):
    for exp_id in EXPERIMENT_IDS:
        print(f"{exp_id:24s} {EXPERIMENT_DESCRIPTIONS[exp_id]}")
    return 0


def _cmd_validate(args):
    spec = load_spec(args.spec)
    print(f"ok: {args.spec}")
    json.dump(spec.to_dict(), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="coopbeam",
        description="Double-IRS cooperative passive beamforming experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment spec (JSON)")
    run_p.add_argument("spec", help="path to the experiment spec file")
    run_p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    run_p.add_argument("--draws", type=int, default=None, help="override draws per point")
    run_p.add_argument("--out", default=None, help="override the output directory")
    run_p.add_argument("--threads", type=int, default=1, help="worker processes")
    run_p.add_argument("--plotdata", action="store_true", help="also emit per-method series files")
    run_p.set_defaults(func=_cmd_run)

    list_p = sub.add_parser("list-experiments", help="list available experiment ids")
    list_p.set_defaults(func=_cmd_list)

    val_p = sub.add_parser("validate", help="check an experiment spec file")
    val_p.add_argument("spec", help="path to the experiment spec file")
    val_p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
