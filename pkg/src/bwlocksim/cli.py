"""Command-line interface.

    bwlocksim run <scenario.yaml> [--out DIR]
    bwlocksim exp fig2|fig6|fig8|table2 [--out DIR]
    bwlocksim plot <dir>
    bwlocksim schema

Exit codes: 0 success, 2 validation error, 3 runtime error.
"""

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def conv(s):
        try:
            v = kind(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be > 0: {s!r}")
        return v
    return conv


def _nonneg_int(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {s!r}")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--period", type=_positive(float), metavar="US",
                        help="regulation period in microseconds")
    common.add_argument("--minperf", type=_positive(float), metavar="MBPS",
                        help="bandwidth allowed to non-holders while a lock is held")
    common.add_argument("--quantum", type=_positive(float), metavar="US",
                        help="simulation quantum in microseconds")
    common.add_argument("--seed", type=_nonneg_int, help="seed for optional jitter")
    common.add_argument("--backend", choices=("cython", "python"),
                        help="kernel implementation (default: fastest available)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="bwlocksim", description="Memory-bandwidth regulation simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    r = sub.add_parser("run", parents=[common], help="run one scenario file")
    r.add_argument("file", type=Path)
    e = sub.add_parser("exp", parents=[common], help="run a canned experiment")
    e.add_argument("name", choices=("fig2", "fig6", "fig8", "table2"))
    pl = sub.add_parser("plot", help="render SVG plots for a run or experiment directory")
    pl.add_argument("dir", type=Path)
    pl.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("schema", help="print the scenario JSON schema")
    return p


def _overrides(a):
    return {"period_us": a.period, "minperf": a.minperf, "quantum_us": a.quantum,
            "seed": a.seed}


def _print_rows(path):
    sys.stdout.write(Path(path).read_text(encoding="utf-8"))


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # usage errors, --help, --version
        return e.code
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    # imported late so that --help works without the numeric stack
    from .bwlock import LockError
    from .engine import EngineError
    from .harness import EXPERIMENTS, run_file
    from .plot import PlotError, plot_dir
    from .scenario import ScenarioError, schema_json

    try:
        if args.cmd == "schema":
            print(schema_json())
        elif args.cmd == "run":
            out = args.out or Path("runs") / args.file.stem
            t = time.perf_counter()
            res = run_file(args.file, out, _overrides(args), backend=args.backend)
            print(f"wrote {res.out} in {time.perf_counter() - t:.2f}s")
        elif args.cmd == "exp":
            out = args.out or Path("results")
            t = time.perf_counter()
            EXPERIMENTS[args.name](out, _overrides(args), backend=args.backend)
            _print_rows(out / args.name / f"{args.name}.csv")
            print(f"{args.name} done in {time.perf_counter() - t:.2f}s")
        elif args.cmd == "plot":
            for o in plot_dir(args.dir):
                print(o)
    except (ScenarioError, PlotError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as e:
        print(f"error: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (LockError, EngineError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
