"""Command-line entry point: ``l96emu {generate,train,evaluate,climate,sweep}``.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 capacity or I/O error.
"""
import argparse
import logging
import sys

from . import harness
from .config import METHODS, load_config
from .errors import L96EmuError

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--seed", type=_u64, help="master seed (data, splits, weights)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--method", choices=METHODS, help="emulator to train")
    common.add_argument("--threads", type=int, help="concurrent rollouts / sweep points")
    common.add_argument("--paper-scale", action="store_true",
                        help="start from the full-size defaults instead of desk scale")
    common.add_argument("--checkpoint", help="model checkpoint (default <out>/model.ckpt)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="l96emu", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="integrate and store the X trajectory")
    sub.add_parser("train", parents=[common], help="fit an emulator on split 0")
    sub.add_parser("evaluate", parents=[common], help="short-term forecast skill")
    sub.add_parser("climate", parents=[common], help="long free run and PDFs")
    sub.add_parser("sweep", parents=[common], help="training-size or reservoir-size sweep")
    return p


def run(args):
    cfg = load_config(args.config, paper_scale=args.paper_scale, overrides={
        "seed": args.seed, "out": args.out, "method": args.method,
        "threads": args.threads})
    if args.command == "generate":
        print(harness.cmd_generate(cfg))
    elif args.command == "train":
        print(harness.cmd_train(cfg))
    elif args.command == "evaluate":
        rep = harness.cmd_evaluate(cfg, args.checkpoint)
        print(f"{rep.method}: mean horizon {rep.mean_horizon:.3f} MTU, median "
              f"{rep.median_horizon:.3f}, E {rep.E:.4f} ({rep.n_ics} ICs)")
    elif args.command == "climate":
        rep = harness.cmd_climate(cfg, args.checkpoint)
        print(f"{rep.method}: PDF sup distance {rep.distance:.4g}, baseline "
              f"{rep.baseline:.4g}, ratio {rep.ratio:.2f}")
    elif args.command == "sweep":
        for row in harness.cmd_sweep(cfg):
            print(",".join(str(v) for v in row))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    for h in logging.getLogger().handlers:
        h.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        run(args)
    except L96EmuError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code if exc.exit_code in (EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO) \
            else EXIT_IO
    except (OSError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
