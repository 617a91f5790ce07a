"""
The ``hardmix`` command line.

.. code-block:: bash

    hardmix run config.yaml              # the command named in the file
    hardmix chaos-test config.yaml --seed 7
    hardmix validate config.yaml         # derived quantities, no run

Exit status is 0 on success, 2 on invalid input or configuration, 3 when a
trajectory meets a pathology, and 4 on a numerical failure.
"""
__all__ = ["EXIT_CODES", "get_parser", "main"]

import argparse
import json
import logging
import os
import pandas as pd
import sys
import time

from datetime import datetime, timezone
from typing import Optional, Sequence

from hardmix.cli.commands import COMMAND_TABLE, RunContext, derived_quantities
from hardmix.cli.config import FORMATS, RunConfig, load_config
from hardmix.cli.manifest import write_manifest
from hardmix.exceptions import ConfigError, HardmixError, NumericalFailure, PathologyError

logger = logging.getLogger("hardmix")

EXIT_CODES = {"ok": 0, "input": 2, "pathology": 3, "numerical": 4}


def _add_overrides(p: argparse.ArgumentParser):
    p.add_argument("config", metavar="config.yaml", help="The run configuration")
    p.add_argument("--seed", type=int, default=None, help="Override the master seed")
    p.add_argument("-o", "--output", default=None, help="Override the output directory")
    p.add_argument("--format", choices=FORMATS, default=None, help="Override the data format")


def _add_scaling(p: argparse.ArgumentParser):
    p.add_argument(
        "--scaling",
        type=float,
        nargs=3,
        metavar=("C1", "C2", "B"),
        default=None,
        help="Override the scaling constants",
    )


def _add_command_flags(name: str, p: argparse.ArgumentParser):
    if name == "simulate":
        p.add_argument("--events-max", type=int, default=None, help="Override the event budget")
        p.add_argument(
            "--contact-tol", type=float, default=None, help="Override the contact window"
        )
    elif name == "pde-solve":
        p.add_argument(
            "--homogeneous",
            action="store_true",
            help="Solve the space-homogeneous system, dropping the transport term",
        )
    elif name == "pseudo-compare":
        p.add_argument("--k", type=int, default=None, help="Override the order")
        p.add_argument("--trials", type=int, default=None, help="Override the number of histories")
        _add_scaling(p)
    elif name == "chaos-test":
        p.add_argument(
            "--n-points",
            type=int,
            default=None,
            help="Use only the first N2 values of chaos.n2",
        )
        p.add_argument("--ensemble", type=int, default=None, help="Override the ensemble size")
        _add_scaling(p)


def get_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hardmix",
        description="Experiments on two-species hard-sphere mixtures",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("-v", "--verbose", action="count", default=0, help="More logging")
    p.add_argument("-q", "--quiet", action="count", default=0, help="Less logging")
    p.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="Worker threads; results do not depend on this",
    )
    sub = p.add_subparsers(dest="action", metavar="command", required=True)

    run = sub.add_parser("run", help="Run the command named in the configuration")
    _add_overrides(run)
    validate = sub.add_parser("validate", help="Check a configuration and print derived values")
    validate.add_argument("config", metavar="config.yaml")

    for name, func in COMMAND_TABLE.items():
        command = sub.add_parser(name, help=func.__doc__.strip().splitlines()[0])
        _add_overrides(command)
        _add_command_flags(name, command)
    return p


def _configure(args) -> RunConfig:
    config = load_config(args.config)
    if args.action == "validate":
        return config
    overrides = {"seed": args.seed, "output": args.output, "format": args.format}
    if args.action != "run":
        overrides["command"] = args.action
    flags = {
        "k": "pseudo__k",
        "trials": "pseudo__histories",
        "events_max": "dynamics__budget",
        "contact_tol": "dynamics__contact_tol",
        "ensemble": "chaos__ensemble",
    }
    for flag, key in flags.items():
        overrides[key] = getattr(args, flag, None)
    if getattr(args, "homogeneous", False):
        overrides["pde__n_space"] = 0
    if getattr(args, "scaling", None) is not None:
        for key, value in zip(("c1", "c2", "b"), args.scaling):
            overrides[f"scaling__{key}"] = value
    n_points = getattr(args, "n_points", None)
    if n_points is not None:
        n2 = config.chaos["n2"]
        if not 1 <= n_points <= len(n2):
            raise ConfigError(
                "chaos.n2", f"--n-points must be between 1 and {len(n2)}, got {n_points}"
            )
        overrides["chaos__n2"] = n2[:n_points]
    return config.with_overrides(**overrides)


def _validate(config: RunConfig) -> int:
    derived = derived_quantities(config)
    print("ok")
    print(pd.Series(derived, dtype=object).to_string())
    return EXIT_CODES["ok"]


def _execute(config: RunConfig, threads: int) -> int:
    ctx = RunContext(config, threads)
    ctx.prepare()
    derived_quantities(config)

    started = datetime.now(timezone.utc)
    clock = time.perf_counter()
    status, error, code, summary = "ok", None, EXIT_CODES["ok"], None
    try:
        summary = COMMAND_TABLE[config.command](ctx)
    except PathologyError as err:
        status, error, code = "pathology", str(err), EXIT_CODES["pathology"]
    except NumericalFailure as err:
        status, error, code = "numerical-failure", str(err), EXIT_CODES["numerical"]
    except HardmixError as err:
        status, error, code = "invalid-input", str(err), EXIT_CODES["input"]
    except BaseException as err:
        status, error = "crashed", f"{type(err).__name__}: {err}"
        raise
    finally:
        write_manifest(
            ctx.directory,
            config,
            ctx.outputs,
            started,
            time.perf_counter() - clock,
            threads,
            status=status,
            error=error,
        )
    if error is not None:
        logger.error("%s failed: %s", config.command, error)
    else:
        print(json.dumps(summary, indent=2, sort_keys=True))
    return code


def main(args: Optional[Sequence[str]] = None) -> int:
    args = get_parser().parse_args(args)
    level = logging.WARNING - 10 * (args.verbose - args.quiet)
    logging.basicConfig(
        level=min(max(level, logging.DEBUG), logging.CRITICAL),
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    if args.threads < 1:
        logger.error("--threads must be positive, got %d", args.threads)
        return EXIT_CODES["input"]

    try:
        config = _configure(args)
    except HardmixError as err:
        logger.error("%s", err)
        return EXIT_CODES["input"]

    if args.action == "validate":
        return _validate(config)
    return _execute(config, args.threads)


if __name__ == "__main__":
    sys.exit(main())
