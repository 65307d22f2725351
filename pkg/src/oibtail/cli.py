"""Command line entry point: ``oibtail {synth,imbalance,fit,tail,report}``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import RunConfig, TailSettings
from .errors import OIBError
from .synth import Driver, GenConfig, SizeLaw

log = logging.getLogger("oibtail")


def _csv(value):
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _ints(value):
    return tuple(int(v) for v in _csv(value))


def _law(value):
    name, _, rest = value.partition(":")
    return name, tuple(float(v) for v in _csv(rest)) if rest else ()


def build_parser():
    parser = argparse.ArgumentParser(
        prog="oibtail",
        description="Order-imbalance series, heavy-tail fits and power-law tail analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--config", help="JSON run configuration; flags override it")
    common.add_argument("--output-dir", help="output directory (env OIBTAIL_OUTPUT_DIR)")
    common.add_argument("--workers", type=int, help="worker count (env OIBTAIL_WORKERS)")
    common.add_argument("--seed", type=int)
    common.add_argument("--input", action="append", dest="inputs", metavar="PATH",
                        help="order-record file; repeatable")
    common.add_argument("--calendar", help="trading calendar file (YYYYMMDD per line); default: dates seen in the input")
    common.add_argument("--instruments", type=_csv, help="comma-separated instrument filter")
    common.add_argument("--kinds", type=_csv, help="NUM,VOL")
    common.add_argument("--timescales", type=_ints, help="comma-separated minutes, each dividing 240")
    common.add_argument("--estimators", type=_csv, help="NLSE,MLE")
    common.add_argument("--models", type=_csv, help="Student,QExp")
    common.add_argument("--n-boot", type=int)
    common.add_argument("--significance", type=float)
    common.add_argument("--min-tail", type=int)
    common.add_argument("--strict", action="store_true", default=None,
                        help="re-scan the cutoff in every bootstrap replica")

    synth = argparse.ArgumentParser(add_help=False)
    synth.add_argument("--synth-instruments", type=_csv)
    synth.add_argument("--synth-days", type=int)
    synth.add_argument("--synth-rate", type=float, help="mean events per trading minute")
    synth.add_argument("--synth-size", type=_law, help="e.g. constant:100 or pareto:1.5,100")
    synth.add_argument("--synth-driver", type=_law, help="iid or student:alpha,L,gain")

    sub.add_parser("synth", parents=[common, synth], help="generate synthetic order files")
    sub.add_parser("imbalance", parents=[common, synth], help="imbalance series and summary statistics")
    sub.add_parser("fit", parents=[common], help="parametric density fits and plot data")
    sub.add_parser("tail", parents=[common], help="tail scans and goodness-of-fit per timescale")
    sub.add_parser("report", parents=[common, synth], help="run every stage")
    return parser


def config_from_args(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    synth = cfg.synth
    synth_flags = {
        "instruments": getattr(args, "synth_instruments", None),
        "n_days": getattr(args, "synth_days", None),
        "events_per_minute": getattr(args, "synth_rate", None),
    }
    if getattr(args, "synth_size", None):
        synth_flags["size_law"] = SizeLaw(*args.synth_size)
    if getattr(args, "synth_driver", None):
        synth_flags["driver"] = Driver(*args.synth_driver)
    synth_flags = {k: v for k, v in synth_flags.items() if v is not None}
    if synth_flags:
        base = synth.as_dict() if synth else {}
        base.update(synth_flags)
        synth = GenConfig(**base)
    tail = cfg.tail
    tail_flags = {"n_boot": args.n_boot, "significance": args.significance,
                  "min_tail": args.min_tail, "strict": args.strict}
    if any(v is not None for v in tail_flags.values()):
        tail = TailSettings(**{**tail.__dict__, **{k: v for k, v in tail_flags.items() if v is not None}})
    return cfg.with_overrides(
        inputs=tuple(args.inputs) if args.inputs else None,
        calendar=args.calendar, instruments=args.instruments, kinds=args.kinds,
        timescales=args.timescales, estimators=args.estimators, models=args.models,
        seed=args.seed, output_dir=args.output_dir, workers=args.workers,
        synth=synth, tail=tail,
    )


STAGES = {
    "synth": pipeline.run_synth,
    "imbalance": pipeline.run_imbalance,
    "fit": pipeline.run_fit,
    "tail": pipeline.run_tail,
    "report": pipeline.run_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "imbalance" and cfg.synth is not None and not cfg.inputs:
            pipeline.run_synth(cfg)
        result = STAGES[args.command](cfg)
    except (OIBError, OSError) as exc:
        print(f"oibtail: error: {exc}", file=sys.stderr)
        return 2
    for failure in result.failures:
        print(f"oibtail: cell failed: {failure}", file=sys.stderr)
    log.info("wrote %d files", len(result.outputs))
    return 1 if result.failures else 0


if __name__ == "__main__":
    sys.exit(main())
