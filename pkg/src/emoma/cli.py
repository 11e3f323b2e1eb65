"""Command line front end for the benchmark harness.

Each subcommand maps to one experiment and writes a CSV (stdout with
``--out -``).  All experiments are deterministic in (flags, --seed).

Examples:
    emoma-bench fill --capacity 32768 --runs 100 --out fill.csv
    emoma-bench churn --capacity 1048576 --replacements 2097152 --out c.csv
    emoma-bench itertime --t-list 10,50,100 --load 0.95 --out it.csv
    emoma-bench scaling --sizes 32768,65536,131072 --runs 1000 --out s.csv
    emoma-bench sweep-p --p-list 0,0.5,0.9,0.99,1.0 --runs 100 --out p.csv
    emoma-bench sweep-k --k-list 1,2,3,4,8 --runs 100 --out k.csv
"""

import argparse
import sys

from .harness import ExperimentSpec, emit_csv, run_experiment

EXTENDED_CAPACITY = 1 << 23
EXTENDED_SIZES = (1 << 15, 1 << 17, 1 << 19, 1 << 21, 1 << 23)


def _int_list(text: str) -> tuple:
    return tuple(int(part) for part in text.split(",") if part)


def _float_list(text: str) -> tuple:
    return tuple(float(part) for part in text.split(",") if part)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=("single", "double", "baseline"),
                        default=None,
                        help="table layout, or the no-filter baseline "
                             "(default single; double for sweep-p)")
    common.add_argument("--capacity", type=int, default=None,
                        help="table cells (power of two; default 32768, "
                             "65536 for sweeps)")
    common.add_argument("--bpe", type=int, default=4,
                        help="filter bits per element")
    common.add_argument("--k", type=int, default=0,
                        help="filter hashes per element (0: per-mode default)")
    common.add_argument("--p", type=float, default=0.99,
                        help="greediness of victim and bucket selection")
    common.add_argument("--t", type=int, default=100,
                        help="iteration budget per insertion")
    common.add_argument("--stash", type=int, default=64,
                        help="stash capacity")
    common.add_argument("--load", type=float, default=0.95,
                        help="target load as a fraction of capacity")
    common.add_argument("--runs", type=int, default=1,
                        help="independent runs per configuration")
    common.add_argument("--seed", type=int, default=1,
                        help="master seed")
    common.add_argument("--impl", choices=("fast", "reference"),
                        default="fast",
                        help="compiled engine or pure Python dictionary")
    common.add_argument("--extended", action="store_true",
                        help="bump defaults to full-scale settings "
                             "(8M capacity; larger size grid)")
    common.add_argument("--out", default="-",
                        help="output CSV path, - for stdout")

    parser = argparse.ArgumentParser(
        prog="emoma-bench",
        description="Deterministic benchmark experiments over the "
                    "one-access dictionary, emitted as CSV.")
    sub = parser.add_subparsers(dest="experiment", required=True)

    sub.add_parser("fill", parents=[common],
                   help="fill to the target load and report stash stats")

    churn = sub.add_parser("churn", parents=[common],
                           help="fill, then delete/insert pairs in "
                                "sixteen windows")
    churn.add_argument("--replacements", type=int, default=1 << 16,
                       help="delete-then-insert pairs after the fill")

    itertime = sub.add_parser("itertime", parents=[common],
                              help="mean insertion cost per load point")
    itertime.add_argument("--t-list", type=_int_list, default=(),
                          help="comma separated t values (default: --t)")

    scaling = sub.add_parser("scaling", parents=[common],
                             help="fill runs across a grid of table sizes")
    scaling.add_argument("--sizes", type=_int_list, default=(),
                         help="comma separated capacities")

    sweep_p = sub.add_parser("sweep-p", parents=[common],
                             help="stash watermark versus p")
    sweep_p.add_argument("--p-list", type=_float_list,
                         default=(0.0, 0.25, 0.5, 0.75, 0.9, 0.95,
                                  0.99, 1.0),
                         help="comma separated p values")

    sweep_k = sub.add_parser("sweep-k", parents=[common],
                             help="stash watermark versus k")
    sweep_k.add_argument("--k-list", type=_int_list,
                         default=(1, 2, 3, 4, 8),
                         help="comma separated k values")

    return parser


def spec_from_args(args) -> ExperimentSpec:
    experiment = args.experiment.replace("-", "_")
    mode = args.mode
    if mode is None:
        mode = "double" if experiment == "sweep_p" else "single"
    capacity = args.capacity
    if capacity is None:
        if experiment in ("sweep_p", "sweep_k"):
            capacity = 1 << 16
        else:
            capacity = EXTENDED_CAPACITY if args.extended else 1 << 15
    sizes = getattr(args, "sizes", ())
    if args.extended and not sizes:
        sizes = EXTENDED_SIZES
    return ExperimentSpec(
        experiment=experiment,
        mode=mode,
        capacity=capacity,
        bpe=args.bpe,
        k=args.k,
        p=args.p,
        t=args.t,
        stash_capacity=args.stash,
        load=args.load,
        runs=args.runs,
        replacements=getattr(args, "replacements", 0),
        sizes=sizes,
        t_list=getattr(args, "t_list", ()),
        p_list=getattr(args, "p_list", ()),
        k_list=getattr(args, "k_list", ()),
        seed=args.seed,
        impl=args.impl,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = spec_from_args(args)
    records, metadata = run_experiment(spec)
    emit_csv(records, args.out, metadata)
    if args.out != "-":
        failed = sum(1 for r in records if r.failed)
        print("wrote %d records to %s (%d failed runs)"
              % (len(records), args.out, failed), file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
