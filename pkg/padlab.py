#!/usr/bin/env python3
"""
padlab - convolution padding laboratory

Runs the probe-loss experiments, Content Richness scoring and feature
dumps from the command line:

    python padlab.py resolution-grid --seed 7 --out grid.csv
    python padlab.py padding-ablation --size 64 --seeds 5 --format json
    python padlab.py gen-test-images --out images/
    python padlab.py richness images/*.ppm --k 3

Exit codes: 0 success, 1 usage error, 2 runtime/numeric error, 3 I/O error.
"""

import argparse
import sys

from tensorcore import PaddingMode
from padmodes import RegionSpec, Side, TrenchSpec
from pbc import Axes, PbcMode
from probe import FitConfig, Solver
from harness import (EXPERIMENTS, RUNNERS, ExperimentConfig, dump_features,
                     gen_test_images)
from utils.config_file import ConfigFileError, load_config_file


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_IO = 3


class UsageError(Exception):
    """Bad command line or config file"""


class PadlabArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; padlab reserves 2 for runtime errors"""

    def error(self, message):
        raise UsageError(message)


def int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def trench_arg(text):
    try:
        return TrenchSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def region_arg(text):
    """'top,left,height,width' with an optional ',outward'"""
    parts = [p.strip() for p in text.split(",")]
    try:
        side = Side(parts[4].lower()) if len(parts) == 5 else Side.INWARD
        top, left, height, width = (int(p) for p in parts[:4])
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(f"expected top,left,height,width[,inward|outward], "
                                         f"got '{text}'")
    return RegionSpec(top, left, height, width, side)


def build_parser():
    parser = PadlabArgumentParser(
        prog="padlab",
        description="Convolution padding laboratory: position-information probes, "
                    "virtual boundaries and Content Richness")
    parser.add_argument("experiment", choices=EXPERIMENTS, help="Experiment to run")
    parser.add_argument("paths", nargs="*", help="Input PPM files (richness)")

    parser.add_argument("--config", help="key=value file supplying flag defaults")
    parser.add_argument("--size", type=int, help="Base latent size s (doubled size is 2s)")
    parser.add_argument("--sizes", type=int_list, default=[64, 128],
                        help="Base and doubled sizes, e.g. 64,128")
    parser.add_argument("--height", type=int, help="Base height for non-square maps")
    parser.add_argument("--width", type=int, help="Base width for non-square maps")
    parser.add_argument("--depth", type=int, default=8, help="Toy network depth")
    parser.add_argument("--channels", type=int, default=16, help="Toy network channels")
    parser.add_argument("--kernel", type=int, default=3, help="Convolution kernel size")
    parser.add_argument("--seeds", type=int, default=5, help="Number of seeds averaged")
    parser.add_argument("--seed", type=int, default=0, help="First seed")
    parser.add_argument("--padding", choices=[m.value for m in PaddingMode], default="zero",
                        help="Padding mode (dump-features)")

    parser.add_argument("--solver", choices=["closed", "adam", "sgd"], default="closed")
    parser.add_argument("--lr", type=float, default=1e-4, help="Iterative solver learning rate")
    parser.add_argument("--iterations", type=int, default=5000)
    parser.add_argument("--ridge", type=float, default=1e-8)

    parser.add_argument("--pbc-mode", choices=["wholepatch", "crossboundary"],
                        default="wholepatch")
    parser.add_argument("--n", type=int, default=3, help="Virtual boundaries per axis")
    parser.add_argument("--n-grid", type=int_list, default=[0, 1, 3, 5, 7])
    parser.add_argument("--lambda-grid", type=float_list,
                        default=[0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    parser.add_argument("--r", type=int, default=0, help="Boundary perturbation range")
    parser.add_argument("--r-grid", type=int_list, default=[0, 1, 2, 4])
    parser.add_argument("--axes", choices=["both", "rows", "cols"], default="both")
    parser.add_argument("--layers", type=int, help="Apply PBC to the first M layers only")
    parser.add_argument("--depths", type=int_list, default=[1, 2, 4, 8])
    parser.add_argument("--dilation", type=int, default=2, help="Dilated baseline factor")
    parser.add_argument("--region-lambda", type=float, default=0.0)
    parser.add_argument("--with-pbc", action="store_true", help="Apply PBC (dump-features)")
    parser.add_argument("--trench", type=trench_arg, action="append", default=[],
                        help="rows:P or cols:P, repeatable (dump-features)")
    parser.add_argument("--region", type=region_arg,
                        help="top,left,height,width[,inward|outward] (dump-features)")

    parser.add_argument("--k", type=int, default=3, help="Richness grid size")
    parser.add_argument("--embedder", choices=["stats", "histogram"], default="stats")
    parser.add_argument("--dump-matrix", action="store_true",
                        help="Include cosine matrices in JSON metadata (richness)")

    parser.add_argument("--out", help="Output file (directory for gen-test-images)")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")
    parser.add_argument("--jobs", type=int, default=1, help="Worker processes for grid cells")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}


def apply_config_file(parser, path):
    """Turn a key=value file into parser defaults (flags given later still win)

    Raises:
        UsageError: On unknown keys or values the flag would reject
    """
    try:
        values = load_config_file(path)
    except ConfigFileError as exc:
        raise UsageError(str(exc))

    actions = {a.dest: a for a in parser._actions if a.option_strings}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key == "config":
            raise UsageError(f"{path}: unknown key '{key}'")
        try:
            if isinstance(action, argparse._StoreTrueAction):
                word = raw.lower()
                if word not in TRUE_WORDS | FALSE_WORDS:
                    raise ValueError(f"expected a boolean, got '{raw}'")
                value = word in TRUE_WORDS
            elif isinstance(action, argparse._AppendAction):
                value = [action.type(v.strip()) for v in raw.split(";") if v.strip()]
            else:
                value = action.type(raw) if action.type else raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}: bad value for '{key}': {exc}")
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"{path}: '{key}' must be one of {sorted(action.choices)}")
        defaults[key] = value
    parser.set_defaults(**defaults)


def parse_args(argv):
    parser = build_parser()
    pre = PadlabArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        apply_config_file(parser, known.config)
    return parser.parse_args(argv)


def config_from_args(args):
    """Map parsed flags onto an ExperimentConfig"""
    sizes = [args.size, 2 * args.size] if args.size else args.sizes
    fit = FitConfig(solver=Solver.parse(args.solver), ridge=args.ridge,
                    lr=args.lr, iterations=args.iterations)
    return ExperimentConfig(
        experiment=args.experiment,
        sizes=sizes,
        height=args.height,
        width=args.width,
        depth=args.depth,
        channels=args.channels,
        kernel_size=args.kernel,
        seeds=args.seeds,
        seed=args.seed,
        padding=PaddingMode.parse(args.padding),
        fit=fit,
        pbc_mode=PbcMode.parse(args.pbc_mode),
        n=args.n,
        n_grid=args.n_grid,
        lambda_grid=args.lambda_grid,
        r=args.r,
        r_grid=args.r_grid,
        axes=Axes.parse(args.axes),
        layers=args.layers,
        depths=args.depths,
        dilation=args.dilation,
        region_lambda=args.region_lambda,
        with_pbc=args.with_pbc,
        trenches=args.trench,
        region=args.region,
        k=args.k,
        embedder=args.embedder,
        images=args.paths,
        dump_matrix=args.dump_matrix,
        jobs=args.jobs,
        verbose=args.verbose,
    )


def run(args):
    """Execute one experiment; returns the exit code"""
    cfg = config_from_args(args)

    if cfg.experiment == "gen-test-images":
        paths = gen_test_images(args.out or ".", size=args.size or 96, seed=cfg.seed)
        for path in paths:
            print(path)
        return EXIT_OK

    if cfg.experiment == "dump-features":
        dump_features(cfg, args.out or "features.pgm")
        return EXIT_OK

    if cfg.experiment == "richness" and not cfg.images:
        raise UsageError("richness needs at least one PPM path")

    report = RUNNERS[cfg.experiment](cfg)
    if args.out:
        report.write(args.out, args.format)
    else:
        sys.stdout.write(report.render(args.format))

    errors = report.meta.get("errors")
    if errors:
        for path, message in errors.items():
            print(f"padlab: skipped {path}: {message}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        return run(args)
    except UsageError as exc:
        print(f"padlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"padlab: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError) as exc:
        print(f"padlab: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
