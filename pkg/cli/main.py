# cli/main.py
"""
tempweak command line: one subcommand per pipeline stage.

Exit codes: 0 success, 1 validation / argument error, 2 I/O error.
"""

import argparse
import logging
import sys
from typing import List, Optional

from core.config import (
    get_connectivity,
    get_median_window,
    get_refinement_threshold,
    get_sampling_config,
    get_synth_config,
    get_tau,
    get_thread_count,
    get_tiling_config,
)
from core.errors import TempweakError
from core.logger import global_logger as logger
from cli import commands
from engine.changemap import MODES
from engine.sampling import TARGET_METHODS


class ToolkitArgumentParser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; here that code means I/O failure, so usage errors exit 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # subcommands repeat the flags with SUPPRESS so a value given before the subcommand survives
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--threads", type=int, help="worker threads (falls back to TEMPWEAK_THREADS, then config)", **kw)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug output on stderr", **kw)
    parser.add_argument("-q", "--quiet", action="store_true", help="errors only on stderr", **kw)
    parser.add_argument("--pretty", action="store_true", help="print reports as a table instead of JSONL", **kw)


def build_parser() -> argparse.ArgumentParser:
    sampling = get_sampling_config()
    tiling = get_tiling_config()
    synth = get_synth_config()

    parser = ToolkitArgumentParser(
        prog="tempweak",
        description="Weak change-detection supervision from single-date semantic masks.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add_global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        _add_global_flags(p, suppress=True)
        p.set_defaults(handler=handler)
        return p

    p = add("changemap", commands.cmd_changemap, "write one change map per manifest record")
    p.add_argument("--manifest", required=True, help="dataset manifest (JSONL)")
    p.add_argument("--mode", choices=MODES, default="siou", help="change map method")
    p.add_argument("--tau", type=float, default=get_tau(), help="sIoU threshold")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=get_connectivity(), help="pixel connectivity")
    p.add_argument("--classes", default=None, help="comma-separated classes of interest (names or indices)")
    p.add_argument("--class-count", type=int, default=None, help="K (default: size of the class table)")
    p.add_argument("--sem-pred-dir", default=None, help="semantic predictions <id>_sem_t.png / <id>_sem_t2.png")
    p.add_argument("--out", required=True, help="output directory for <id>_change.png")

    p = add("batch-plan", commands.cmd_batch_plan, "plan balanced real/fake training batches")
    p.add_argument("--manifest", required=True, help="dataset manifest (JSONL)")
    p.add_argument("--batch-size", type=int, default=int(sampling.get("batch_size", 32)), help="B")
    p.add_argument("--p-real", type=float, default=float(sampling.get("p_real", 0.25)), help="fraction of real pairs")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--batches", type=int, default=int(sampling.get("batches", 1)), help="number of batches")
    p.add_argument("--out", required=True, help="plan file")
    p.add_argument("--targets-out", default=None, help="also write each slot's change target here")
    p.add_argument("--target-method", choices=TARGET_METHODS, default=sampling.get("target_method", "siou"),
                   help="fake-pair target method")
    p.add_argument("--tau", type=float, default=get_tau(), help="sIoU threshold")
    p.add_argument("--class-count", type=int, default=None, help="K (default: size of the class table)")

    p = add("refine", commands.cmd_refine, "drop train pairs predicted as changed")
    p.add_argument("--manifest", required=True, help="dataset manifest (JSONL)")
    p.add_argument("--pred-dir", action="append", required=True,
                   help="predictions <id>_change.png; repeat for several rounds")
    p.add_argument("--threshold", type=float, default=get_refinement_threshold(), help="changed-pixel fraction")
    p.add_argument("--out", required=True, help="refined manifest")
    p.add_argument("--report", default=None, help="refinement report (JSONL)")

    p = add("evaluate", commands.cmd_evaluate, "score change predictions against references")
    p.add_argument("--pred", required=True, help="prediction directory (<id>_change.png)")
    p.add_argument("--ref", required=True, help="reference directory (<id>_change.png)")
    p.add_argument("--manifest", default=None, help="manifest supplying per-record resolution")
    p.add_argument("--median-filter", action="store_true", help="also score median-filtered predictions")
    p.add_argument("--median-window", type=int, default=get_median_window(), help="median window size")
    p.add_argument("--resolution", type=float, default=None, help="m/px when no manifest entry applies")
    p.add_argument("--out", default=None, help="report file (JSONL); stdout when omitted")

    p = add("tile", commands.cmd_tile, "cut a raster into overlapping tiles")
    p.add_argument("--input", required=True, help="input PNG")
    p.add_argument("--size", type=int, default=int(tiling.get("tile_size", 256)), help="tile size P")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--overlap", type=int, default=int(tiling.get("overlap", 6)), help="overlap in pixels")
    group.add_argument("--overlap-fraction", type=float, default=None, help="overlap as a fraction of P")
    p.add_argument("--prefix", default="tile", help="tile file prefix")
    p.add_argument("--out", required=True, help="output directory")

    p = add("stitch", commands.cmd_stitch, "stitch per-tile change maps into a mosaic")
    p.add_argument("--grid", required=True, help="grid.jsonl written by tile")
    p.add_argument("--tiles", required=True, help="directory of tile change maps")
    p.add_argument("--prefix", default="tile", help="tile file prefix")
    p.add_argument("--suffix", default="_change", help="tile file suffix before .png")
    p.add_argument("--out", required=True, help="mosaic PNG")

    p = add("merge-classes", commands.cmd_merge_classes, "collapse a K-class mask to foreground/background")
    p.add_argument("--input", required=True, help="input mask PNG")
    p.add_argument("--out", required=True, help="output mask PNG")
    p.add_argument("--class-count", type=int, default=None, help="K (default: size of the class table)")
    p.add_argument("--foreground", default=None, help="comma-separated foreground classes (default: class table)")

    p = add("resample", commands.cmd_resample, "nearest-neighbour downsampling of a mask")
    p.add_argument("--input", required=True, help="input mask PNG")
    p.add_argument("--out", required=True, help="output mask PNG")
    p.add_argument("--factor", type=int, required=True, help="integer downsampling factor")
    p.add_argument("--resolution", type=float, default=None, help="input m/px")
    p.add_argument("--class-count", type=int, default=None, help="K (default: size of the class table)")

    p = add("synth", commands.cmd_synth, "generate a synthetic bi-temporal dataset")
    p.add_argument("--seed", type=int, required=True, help="random seed")
    p.add_argument("--pairs", type=int, default=int(synth.get("pairs", 64)), help="number of pairs")
    p.add_argument("--size", type=int, default=int(synth.get("size", 64)), help="image size in pixels")
    p.add_argument("--change-rate", type=float, default=float(synth.get("change_rate", 0.1)),
                   help="fraction of pairs with a real change")
    p.add_argument("--jitter", type=int, default=int(synth.get("jitter", 1)), help="max building shift in pixels")
    p.add_argument("--val-fraction", type=float, default=float(synth.get("val_fraction", 0.0)),
                   help="fraction of pairs in the val split")
    p.add_argument("--out", required=True, help="output directory")

    p = add("validate", commands.cmd_validate, "check masks against the raster invariants")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--manifest", default=None, help="validate every mask of a manifest")
    source.add_argument("--input", default=None, help="validate one mask PNG")
    p.add_argument("--class-count", type=int, default=None, help="K (default: size of the class table)")

    return parser


def _apply_verbosity(args) -> None:
    if getattr(args, "verbose", False):
        logger.set_console_level(logging.DEBUG)
    elif getattr(args, "quiet", False):
        logger.set_console_level(logging.ERROR)


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # --help exits 0, usage errors exit 1
        return e.code if isinstance(e.code, int) else 1

    _apply_verbosity(args)
    threads = get_thread_count(args.threads)
    try:
        return args.handler(args, threads)
    except TempweakError as e:
        logger.log_error(f"❌ {args.command}: {e}")
        return e.exit_code
    except OSError as e:
        logger.log_error(f"❌ {args.command}: I/O failure: {e}")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
