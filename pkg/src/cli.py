"""Command-line front end: ``check``, ``mcmc``, ``mcem`` and ``is``.

Exit codes: 0 success, 1 usage or configuration error, 2 model error,
3 runtime numeric or algorithm failure.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from .commands import COMMANDS, RunConfig, cmd_check, format_check_report
from .errors import (
    AlgorithmError,
    BugsError,
    ConfigError,
    DiagnosticsError,
    DistributionError,
    ModelDefinitionError,
    ModelError,
    NumericError,
    ParseError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MODEL = 2
EXIT_RUNTIME = 3

_EXIT_CODES = (
    (ConfigError, EXIT_CONFIG),
    ((ParseError, ModelDefinitionError, DistributionError, ModelError), EXIT_MODEL),
    ((NumericError, AlgorithmError, DiagnosticsError), EXIT_RUNTIME),
)


def exit_code_for(error: BugsError) -> int:
    for kinds, code in _EXIT_CODES:
        if isinstance(error, kinds):
            return code
    return EXIT_RUNTIME


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the configuration-error code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="bugs-inference",
        description="Compile BUGS-language models and run MCMC, MCEM or importance sampling.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug detail")
    verbs = parser.add_subparsers(dest="verb", required=True)
    for verb, help_text in (
        ("check", "parse and build a model, print its structure"),
        ("mcmc", "run adaptive random-walk MCMC"),
        ("mcem", "maximum likelihood by Monte Carlo EM"),
        ("is", "importance-sampling estimate of a marginal probability"),
    ):
        sub = verbs.add_parser(verb, help=help_text)
        sub.add_argument("--model", help="model file")
        sub.add_argument("--constants", help="constants file (JSON)")
        sub.add_argument("--data", help="data file (JSON)")
        sub.add_argument("--config", help="run configuration (JSON)")
        sub.add_argument("--out", help="output directory")
        sub.add_argument("--inits", help="initial values file (JSON)")
        if verb != "check":
            sub.add_argument("--seed", type=int, help="random seed")
        if verb == "mcmc":
            sub.add_argument("--chains", type=int, help="number of independent chains")
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    return config.with_overrides(
        model=args.model,
        constants=args.constants,
        data=args.data,
        out=args.out,
        inits=args.inits,
        seed=getattr(args, "seed", None),
        chains=getattr(args, "chains", None),
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _config(args)
        if args.verb == "check":
            report = cmd_check(config.model, config.constants, config.data, out=args.out, inits_path=config.inits)
            print(format_check_report(report))
        else:
            result = COMMANDS[args.verb](config)
            print(json.dumps(result, indent=2, default=float))
    except BugsError as exc:
        logger.error("%s", exc)
        return exit_code_for(exc)
    except Exception:
        logger.exception("Unexpected failure in %s", args.verb)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
