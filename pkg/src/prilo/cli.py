"""``prilo`` command line: train, solve, benchmark and inspect-weights."""
import argparse
import logging
import math
import sys

from .config import apply_overrides, load_config
from .errors import PriloError
from .harness import cmd_benchmark, cmd_solve, cmd_train, inspect_weights


def _common(p):
    p.add_argument("--config", required=True, help="experiment config (or run manifest)")
    p.add_argument("--seed", type=int, help="base seed (overrides the config)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--limit", type=int, help="use at most N images")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config value; may be repeated")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="prilo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the VAE decoder and write PRGW weights")
    _common(p)

    p = sub.add_parser("solve", help="reconstruct a single image")
    _common(p)
    p.add_argument("--index", type=int, default=0, help="image index in the dataset")
    p.add_argument("--trace", action="store_true", help="write a per-iteration trace CSV")
    p.add_argument("--no-register", action="store_true", help="skip shift/flip registration")

    p = sub.add_parser("benchmark", help="run over an image set and write CSV + summary")
    _common(p)
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--no-register", action="store_true", help="skip shift/flip registration")

    p = sub.add_parser("inspect-weights", help="describe a PRGW weight file")
    p.add_argument("path")
    return parser


def _config(args):
    config = load_config(args.config)
    sets = list(args.set)
    if getattr(args, "workers", None):
        sets.append(f"experiment.workers={args.workers}")
    return apply_overrides(
        config,
        seed=args.seed,
        out=args.out,
        limit=args.limit,
        trace=True if getattr(args, "trace", False) else None,
        register=False if getattr(args, "no_register", False) else None,
        assignments=sets,
    )


def _fmt(stats):
    if not stats.get("n"):
        return "n/a"
    half = 1.96 * stats["stderr"] if math.isfinite(stats["stderr"]) else math.nan
    return f"{stats['mean']:.4f} +/- {half:.4f} (n={stats['n']})"


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "inspect-weights":
            print(inspect_weights(args.path))
            return 0
        config = _config(args)
        if args.command == "train":
            print(f"weights: {cmd_train(config)}")
        elif args.command == "solve":
            out = cmd_solve(config, args.index)
            print(f"image {args.index}: {out.report.line()}")
            print(f"restart losses: {' '.join(f'{v:.6g}' for v in out.result.restart_losses)}"
                  f" (selected {out.result.restart_index})")
            print(f"reconstruction: {out.image_path}")
            if out.trace_path:
                print(f"trace: {out.trace_path}")
        else:
            out = cmd_benchmark(config)
            s = out.summary
            print(f"{s['count']} images, {s['failed']} failed")
            for key in ("psnr_db", "psnr_db_registered", "ssim", "ssim_registered"):
                print(f"{key}: {_fmt(s[key])}")
            print(f"results: {out.csv_path}")
            print(f"manifest: {out.manifest_path}")
    except PriloError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
