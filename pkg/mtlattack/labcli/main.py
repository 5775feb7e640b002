# -----------------------------------------------------------------------------
# File: main.py
# Description: `mtlattack` command line entry point.
#
#              mtlattack <train|attack|sweep|diagnose|advtrain|report>
#                        --config FILE [--seed N] [--out DIR] [--jobs N]
#                        [--log-level LEVEL]
#
#              Exit status is 0 on success, 2 for an invalid configuration
#              and 1 for any other laboratory error, file system errors
#              included; the error is printed to stderr as one JSON line.
#
# License: MIT
# -----------------------------------------------------------------------------

import argparse
import json
import logging
import sys

from mtlattack.config.experiment_config import ExperimentConfig
from mtlattack.exceptions.mtlattack_exception import CheckpointError, ConfigError, MtlAttackBaseError
from mtlattack.labcli.commands import COMMANDS, RunContext
from mtlattack.version import __version__


log = logging.getLogger()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

DESCRIPTIONS = {
    "train": "train one checkpoint per grid model",
    "attack": "run the attack grid against the trained models",
    "sweep": "attack grid aggregated into epsilon vs ARP curves",
    "diagnose": "transferability, dominance and alignment per model",
    "advtrain": "adversarial training and the robustness matrix",
    "report": "re-derive tables and plots from stored records",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="mtlattack", description="Multi-task adversarial attack laboratory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name, help_text in DESCRIPTIONS.items():
        sub = subparsers.add_parser(name, help=help_text, description=help_text)
        sub.add_argument("--config", required=True, help="YAML experiment file")
        sub.add_argument("--seed", type=int, default=None, help="override the config seed")
        sub.add_argument("--out", default=None, help="override the output directory")
        sub.add_argument("--jobs", type=int, default=1, help="parallel grid workers (default 1)")
        sub.add_argument("--log-level", default="WARNING",
                         choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="logging level (default WARNING)")
    return parser


def _fail(error: MtlAttackBaseError):
    print(json.dumps(error.to_dict(), sort_keys=True), file=sys.stderr)
    return EXIT_CONFIG if isinstance(error, ConfigError) else EXIT_FAILURE


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(message)s")

    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be a positive integer")
        config = ExperimentConfig.from_file(args.config).with_overrides(seed=args.seed, output_dir=args.out)
        log.info(f"{args.command}: run {config.config_hash} under {RunContext(config).run_dir}")
        COMMANDS[args.command](config, args.jobs)
    except MtlAttackBaseError as e:
        return _fail(e)
    except OSError as e:
        log.debug(f"{args.command}: file system error", exc_info=True)
        return _fail(CheckpointError(f"cannot access {e.filename or 'the run directory'}: {e.strerror or e}"))
    except ValueError as e:
        log.debug(f"{args.command}: unexpected value error", exc_info=True)
        return _fail(MtlAttackBaseError(str(e)))

    print(RunContext(config).run_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
