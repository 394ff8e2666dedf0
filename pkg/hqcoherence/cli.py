"""
Command-line front end: `trace`, `fit`, `sweep` and `presets`.

Exit codes are 0 on success (soft fit failures included), 1 for invalid
input and 2 when an output cannot be written.
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import NoReturn, Union

from . import __version__
from .analysis import t2_star
from .averaging import MethodKind, average_return_probability
from .config import RunConfig, format_diagnostics, load_config
from .exceptions import (
    ConfigurationError,
    InsufficientDataError,
    InvalidParametersError,
    OutputError,
    TraceFormatError,
)
from .materials import PRESETS
from .sweep import choose_time_window, derive_point_params, point_seed, run_sweep
from .tables import (
    fit_to_json,
    read_trace_csv,
    sweep_to_json,
    write_sweep_csv,
    write_text,
    write_trace_csv,
)
from .templating import default_renderer

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_OUTPUT_ERROR = 2

_LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as configuration errors, exit code 1."""

    def error(self, message: str) -> NoReturn:
        raise ConfigurationError([("arguments", message)])


def _configure_logging(verbose: int, config: Union[RunConfig, None] = None) -> None:
    level = _LOG_LEVELS[min(verbose, len(_LOG_LEVELS) - 1)]
    if verbose == 0 and config is not None:
        level = logging.getLevelName(config.output.verbosity)
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    logging.getLogger("hqcoherence").setLevel(level)


def _load(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    config = config.with_overrides(
        seed=args.seed,
        method=args.method,
        samples=args.samples,
        out=args.out,
        emit_plot=getattr(args, "emit_plot", None),
        workers=getattr(args, "workers", None),
    )
    _configure_logging(args.verbose, config)
    return config


def cmd_trace(args: argparse.Namespace) -> int:
    config = _load(args)
    material, ratio, j0 = config.single_point()
    base, spec = derive_point_params(j0, ratio, material)
    # same seed as the corresponding single-point sweep
    seed = point_seed(config.master_seed, (0, 0, 0))
    window = choose_time_window(base, spec, config.window, seed=seed)
    trace = average_return_probability(
        base, spec, window.times, config.method.build(seed)
    )
    write_trace_csv(config.output.path, trace, leakage=args.leakage)
    logger.info(
        "Wrote %d points over %g ns to %s",
        len(trace),
        window.t_max,
        config.output.path,
    )
    if config.output.json_path:
        write_text(config.output.json_path, fit_to_json(t2_star(trace)))
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    _configure_logging(args.verbose)
    trace = read_trace_csv(args.trace)
    fit = t2_star(trace, fixed_alpha=args.fixed_alpha)
    sys.stdout.write(default_renderer.render("fit_report.txt.jinja", {"fit": fit}))
    if args.json:
        write_text(args.json, fit_to_json(fit))
    if not fit.converged:
        logger.warning("The envelope fit did not converge")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _load(args)
    result = run_sweep(config.to_sweep_spec())
    write_sweep_csv(config.output.path, result)
    logger.info("Wrote %d rows to %s", len(result), config.output.path)
    if config.output.json_path:
        write_text(config.output.json_path, sweep_to_json(result))

    if config.output.emit_plot:
        plot_path = Path(config.output.resolved_plot_path)
        curves = [
            {"material": material.name, "sigma_ratio": ratio}
            for material in config.materials
            for ratio in config.sigma_ratios
        ]
        script = default_renderer.render(
            "sweep.gp.jinja",
            {
                "csv_path": Path(config.output.path).name,
                "image_path": plot_path.with_suffix(".png").name,
                "script_name": plot_path.name,
                "curves": curves,
            },
        )
        write_text(plot_path, script)
    return EXIT_OK


def cmd_presets(args: argparse.Namespace) -> int:
    _configure_logging(args.verbose)
    sys.stdout.write(
        default_renderer.render("presets.txt.jinja", {"presets": PRESETS.values()})
    )
    return EXIT_OK


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Log more; repeat for debug output.",
    )

    run = ArgumentParser(add_help=False)
    run.add_argument("--config", metavar="PATH", help="JSON run configuration.")
    run.add_argument("--out", metavar="PATH", help="Output CSV path.")
    run.add_argument("--seed", type=int, metavar="N", help="Master seed.")
    run.add_argument(
        "--method",
        choices=[kind.value for kind in MethodKind],
        help="Averaging method.",
    )
    run.add_argument(
        "--samples", type=int, metavar="N", help="Monte Carlo samples per point."
    )

    parser = ArgumentParser(
        prog="hqcoherence",
        description="Dephasing of the hybrid qubit under quasi-static noise.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", required=True)

    trace = subparsers.add_parser(
        "trace",
        parents=[common, run],
        help="Average the return probability of a single point.",
    )
    trace.add_argument(
        "--leakage", action="store_true", help="Add the leakage population column."
    )
    trace.set_defaults(handler=cmd_trace)

    fit = subparsers.add_parser(
        "fit", parents=[common], help="Fit the envelope of a trace CSV."
    )
    fit.add_argument("trace", metavar="TRACE", help="Trace CSV written by `trace`.")
    fit.add_argument("--json", metavar="PATH", help="Also write the fit as JSON.")
    fit.add_argument(
        "--fixed-alpha",
        type=float,
        metavar="A",
        help="Pin the stretch exponent.",
    )
    fit.set_defaults(handler=cmd_fit)

    sweep = subparsers.add_parser(
        "sweep", parents=[common, run], help="Run the full parameter sweep."
    )
    sweep.add_argument(
        "--emit-plot", action="store_true", help="Also write a gnuplot script."
    )
    sweep.add_argument("--workers", type=int, metavar="N", help="Worker processes.")
    sweep.set_defaults(handler=cmd_sweep)

    presets = subparsers.add_parser(
        "presets", parents=[common], help="List the bundled materials."
    )
    presets.set_defaults(handler=cmd_presets)
    return parser


def main(argv: Union[Sequence[str], None] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except ConfigurationError as e:
        for line in format_diagnostics(e):
            sys.stderr.write(f"error: {line}\n")
        return EXIT_INPUT_ERROR
    except (TraceFormatError, InsufficientDataError, InvalidParametersError) as e:
        sys.stderr.write(f"error: {e.message}\n")
        return EXIT_INPUT_ERROR
    except OutputError as e:
        sys.stderr.write(f"error: {e.message}\n")
        return EXIT_OUTPUT_ERROR


__all__ = ["build_parser", "main"]
