"""Command line entry point: `solve run|mms|sweep`.

Exit codes: 0 success, 2 a run did not reach steady state, 1 error.
The environment variable DARCY_BENARD_OUTPUT_DIR overrides the output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, SimulationConfig, load_config
from .linalg import SolverError
from .scenarios import run_mms, run_scenario, run_sweep

OUTPUT_ENV = "DARCY_BENARD_OUTPUT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2

log = logging.getLogger("darcy_benard")


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list is empty")
    return values


def _int_list(text: str) -> list[int]:
    values = _float_list(text)
    # 1/16 style mesh sizes are accepted as well as cell counts
    out = [int(round(1.0 / v)) if 0 < v < 1 else int(v) for v in values]
    if any(v < 2 for v in out):
        raise argparse.ArgumentTypeError("mesh resolutions must be at least 2 cells per side")
    return out


def _json(record: dict) -> str:
    clean = {k: (None if isinstance(v, float) and v != v else v) for k, v in record.items()}
    return json.dumps(clean)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="solve", description="Darcy-Benard convection solver")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="march one configuration to steady state")
    run.add_argument("config", type=Path)
    run.add_argument("--output-dir", type=Path)
    run.add_argument("--progress", action="store_true", help="echo per-step JSON records to stdout")

    mms = sub.add_parser("mms", help="manufactured-solution convergence study")
    mms.add_argument("--levels", type=int, default=6)
    mms.add_argument("--base-n", type=int, default=4)
    mms.add_argument("--output-dir", type=Path)

    sweep = sub.add_parser("sweep", help="Rayleigh-number or mesh sweep of one configuration")
    sweep.add_argument("config", type=Path)
    group = sweep.add_mutually_exclusive_group(required=True)
    group.add_argument("--ra", type=_float_list, help="e.g. 50,100,500,1000")
    group.add_argument("--h", type=_int_list, help="cells per side, e.g. 16,32,64")
    sweep.add_argument("--output-dir", type=Path)
    return p


def _output_dir(args, config: SimulationConfig | None) -> Path:
    if os.environ.get(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    if args.output_dir is not None:
        return args.output_dir
    return Path(config.output_dir if config is not None else "output")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "mms":
            if args.levels < 2:
                raise ConfigError("mms needs at least 2 levels")
            out = _output_dir(args, None)
            res = run_mms(args.levels, args.base_n, out)
            for row in res.summary["rows"]:
                print(_json(row))
            return EXIT_OK

        config = load_config(args.config)
        out = _output_dir(args, config)
        if args.command == "run":
            echo = (lambda r: print(_json(r), flush=True)) if args.progress else None
            res = run_scenario(config, out, progress=echo)
            print(_json(res.summary))
        else:
            res = run_sweep(config, ra_list=args.ra, h_list=args.h, output_dir=out)
            for row in res.summary["rows"]:
                print(_json(row))
        return EXIT_OK if res.converged else EXIT_NOT_CONVERGED
    except (ConfigError, SolverError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
