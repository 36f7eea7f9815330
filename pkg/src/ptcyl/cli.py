"""
Command-line front-end

    ptcyl precompute    -c run.cfg
    ptcyl run           -c run.cfg [--restart snapshot_000100.bin]
    ptcyl validate      -c run.cfg --suite spectral --suite influence
    ptcyl export-csv    snapshot_000100.bin out.csv --field psi_u -m 1 -p s

Exit codes: 0 success, 1 error, 2 validation failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .solver import functions
from .solver.config import SolverConfig, load_config, with_overrides
from .solver.errors import ConfigError, SolverError
from .solver.spectral import PARITIES
from .solver.storage import MAGNETIC_FIELDS, VELOCITY_FIELDS
from .solver.validation import SUITES

logger = logging.getLogger("ptcyl")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptcyl", description="Spectral poloidal-toroidal solver for a finite cylinder"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(name: str, help_text: str) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("-c", "--config", default=None, help="key = value configuration file")
        cmd.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override one configuration key (repeatable)",
        )
        return cmd

    with_config("precompute", "Build or load influence matrices (and DtN maps for MHD)")
    with_config("precompute-dtn", "Build or load the DtN maps")
    run = with_config("run", "Time integration")
    run.add_argument("--restart", default=None, help="Snapshot to restart from")
    with_config("diagnose", "Influence matrix regularisation reports")
    with_config("diagnose-dtn", "DtN accuracy and spherical-harmonic conditioning")
    validate = with_config("validate", "Run validation suites")
    validate.add_argument(
        "--suite",
        dest="suites",
        action="append",
        choices=list(SUITES),
        help="Suite to run (repeatable; all when omitted)",
    )

    export = sub.add_parser("export-csv", help="Export one snapshot block on an (r, z) grid")
    export.add_argument("snapshot", help="Snapshot file")
    export.add_argument("output", help="CSV file to write")
    export.add_argument(
        "--field", default="psi_u", choices=list(VELOCITY_FIELDS + MAGNETIC_FIELDS)
    )
    export.add_argument("-m", type=int, default=0, help="Azimuthal wavenumber")
    export.add_argument("-p", "--parity", default="s", choices=list(PARITIES))
    export.add_argument("--points", type=int, default=33, help="Grid points per direction")
    export.add_argument("--theta", type=float, default=0.0, help="Azimuth of the evaluation")
    return parser


def _config(args: argparse.Namespace) -> SolverConfig:
    config = load_config(args.config)
    changes = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"Override {item!r} is not KEY=VALUE")
        changes[key.strip()] = value
    return with_overrides(config, changes)


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "export-csv":
        functions.export_csv(
            Path(args.snapshot),
            Path(args.output),
            args.field,
            args.m,
            args.parity,
            args.points,
            args.theta,
        )
        return EXIT_OK

    config = _config(args)
    if args.command == "precompute":
        records = functions.precompute(config)
        logger.info("%d artefacts, %d from cache", len(records), sum(r.cached for r in records))
    elif args.command == "precompute-dtn":
        functions.precompute_dtn(config)
    elif args.command == "run":
        restart = Path(args.restart) if args.restart else None
        functions.run(config, restart=restart)
    elif args.command == "diagnose":
        functions.diagnose(config)
    elif args.command == "diagnose-dtn":
        functions.diagnose_dtn(config)
    elif args.command == "validate":
        if not functions.validate(config, args.suites):
            return EXIT_VALIDATION
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except (SolverError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
