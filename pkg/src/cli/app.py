"""
Command-line front end
Argument parsing, configuration, logging setup and dispatch to the async
subcommand handlers. Exit codes: 0 success, 1 validation, 2 computation.
"""
import argparse
import asyncio
import logging
import sys
from typing import Dict, List, Optional, Sequence

from src.cli.handlers import Handlers
from src.core.error_handler import ErrorHandler, UsageError
from src.utils.config import RunConfig, load_config
from src.utils.helpers import parse_float_list, parse_int_list, parse_seed, setup_logging

logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so errors keep the one-line format"""

    def error(self, message):
        raise UsageError(message)


def _common_options() -> argparse.ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file merged over the default settings")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--threads", type=int, help="worker threads for ensemble generation")
    common.add_argument("--seed", type=parse_seed, help="64-bit seed (decimal or 0x hex)")
    common.add_argument("--cache", help="family coefficient cache directory")
    common.add_argument("--out", help="output file (JSON; tables also as .csv)")
    common.add_argument("--grid", help="evaluation disc as <center>,<radius>,<K>")
    return common


def build_parser() -> ArgumentParser:
    common = _common_options()
    parser = ArgumentParser(prog="bagchi", description="Random Euler products and weight-2 prime-level families")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    model = commands.add_parser("model", help="random Euler product samples").add_subparsers(
        dest="action", required=True, parser_class=ArgumentParser
    )
    for name in ("sample", "ensemble"):
        sub = model.add_parser(name, parents=[common])
        sub.add_argument("--nmax", type=int, help="coefficient horizon 2N of the smoothed sum")
        if name == "ensemble":
            sub.add_argument("--samples", type=int, help="ensemble size M")

    family = commands.add_parser("family", help="newform families").add_subparsers(
        dest="action", required=True, parser_class=ArgumentParser
    )
    compute = family.add_parser("compute", parents=[common])
    compute.add_argument("--level", type=int, required=True)
    compute.add_argument("--coeffs", type=int, help="coefficient horizon nmax")
    imported = family.add_parser("import", parents=[common])
    imported.add_argument("--path", required=True, help="directory with meta.json and coeffs.csv")
    exported = family.add_parser("export", parents=[common])
    exported.add_argument("--level", type=int, required=True)
    exported.add_argument("--path", required=True)

    compare = commands.add_parser("compare", parents=[common], help="family against model ensemble")
    compare.add_argument("--level", type=int, help="compute the family side at this level")
    compare.add_argument("--family", help="family ensemble JSON instead of --level")
    compare.add_argument("--model", help="model ensemble JSON; generated from --seed when absent")
    compare.add_argument("--samples", type=int, help="model ensemble size when generating")
    compare.add_argument("--N", type=int, help="smoothing length")

    universality = commands.add_parser("universality", parents=[common], help="count forms close to a target")
    universality.add_argument("--level", type=int, required=True)
    universality.add_argument("--target", required=True, help="const:<c> | poly:<c0,c1,...> | file:<path>")
    universality.add_argument("--eps", type=parse_float_list, required=True, help="one or more tolerances")
    universality.add_argument("--N", type=int)
    universality.add_argument("--eta", type=float, default=0.5, help="threshold for the natural-density bound")

    support = commands.add_parser("support-approx", parents=[common], help="greedy Euler-product approximation")
    support.add_argument("--target", required=True)
    support.add_argument("--pmax", type=int)
    support.add_argument("--n0", type=int)
    support.add_argument("--sweeps", type=int)

    check = commands.add_parser("check", help="diagnostics").add_subparsers(
        dest="action", required=True, parser_class=ArgumentParser
    )
    sato_tate = check.add_parser("sato-tate", parents=[common])
    sato_tate.add_argument("--level", type=int, required=True)
    sato_tate.add_argument("--prime", type=int, default=2)
    sato_tate.add_argument("--weighting", choices=("harmonic", "natural"), default="harmonic")

    moments = check.add_parser("moments", parents=[common])
    moments.add_argument("--level", type=int, required=True)
    moments.add_argument("--primes", type=parse_int_list, required=True)
    moments.add_argument("--exponents", type=parse_int_list, required=True)
    moments.add_argument("--weighting", choices=("harmonic", "natural"), default="harmonic")

    petersson = check.add_parser("petersson", parents=[common])
    petersson.add_argument("--level", type=int, required=True)
    petersson.add_argument("--pairs", help="m:n pairs, e.g. 2:2,2:3,3:5")
    petersson.add_argument("--c-factor", type=int)

    smoothing = check.add_parser("smoothing", parents=[common])
    smoothing.add_argument("--source", choices=("model", "family"), default="model")
    smoothing.add_argument("--level", type=int)
    smoothing.add_argument("--N-list", type=parse_int_list, default=[256, 1024, 4096])
    smoothing.add_argument("--samples", type=int, default=200)

    growth = check.add_parser("growth", parents=[common])
    growth.add_argument("--level", type=int)
    growth.add_argument("--sigma", type=float, default=0.75)
    growth.add_argument("--t-list", type=parse_float_list, default=[0.0, 2.0, 5.0, 10.0, 20.0])
    growth.add_argument("--samples", type=int, default=0, help="model samples (0 skips the model side)")
    growth.add_argument("--N", type=int)

    second = check.add_parser("second-moment", parents=[common])
    second.add_argument("--sigma", type=float, default=0.75)
    second.add_argument("--u-list", type=parse_int_list, default=[100, 1000, 10000])
    second.add_argument("--samples", type=int, default=500)

    probability = check.add_parser("support-probability", parents=[common])
    probability.add_argument("--target", required=True)
    probability.add_argument("--eps", type=parse_float_list, required=True)
    probability.add_argument("--samples", type=int, default=2000)
    probability.add_argument("--N", type=int, default=1 << 14)

    reflection = check.add_parser("reflection", parents=[common])
    reflection.add_argument("--level", type=int, required=True)
    reflection.add_argument("--s", type=float)
    reflection.add_argument("--N", type=int)
    return parser


def _run_config(args: argparse.Namespace, settings: Dict) -> RunConfig:
    run = settings.get("run", {})
    grid = settings.get("grid", {})
    command = " ".join(part for part in (args.command, getattr(args, "action", None)) if part)
    known = {"command", "action", "config", "log_level", "threads", "seed", "cache", "out", "grid",
             "level", "coeffs", "nmax", "samples", "N", "target", "eps"}
    extra = {k: v for k, v in vars(args).items() if k not in known and v is not None}
    eps = getattr(args, "eps", None)
    return RunConfig(
        command=command,
        seed=args.seed if args.seed is not None else int(run.get("seed", 0)),
        levels=[args.level] if getattr(args, "level", None) else [],
        nmax=getattr(args, "coeffs", None) or getattr(args, "nmax", None),
        N=getattr(args, "N", None),
        M=getattr(args, "samples", None),
        grid=args.grid or f"{grid.get('center', 0.75)},{grid.get('radius', 0.2)},{grid.get('K', 64)}",
        target=getattr(args, "target", None),
        eps=eps,
        cache_dir=args.cache or run.get("cache_dir"),
        out=args.out,
        threads=args.threads or int(run.get("threads", 4)),
        extra=extra,
    )


async def _dispatch(args: argparse.Namespace, config: RunConfig, settings: Dict) -> int:
    handlers = Handlers(config, settings, ErrorHandler())
    return await handlers.dispatch(args)


def run(argv: Optional[Sequence[str]] = None, stream=None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code"""
    stream = stream or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        settings = load_config(args.config)
        logging_cfg = settings.get("logging", {})
        setup_logging(args.log_level or logging_cfg.get("level", "INFO"), logging_cfg.get("file"))
        config = _run_config(args, settings)
    except Exception as e:
        print(ErrorHandler.format_one_line(e), file=stream)
        return ErrorHandler.exit_code_for(e)
    return asyncio.run(_dispatch(args, config, settings))


def main(argv: Optional[List[str]] = None):
    sys.exit(run(argv))
