"""
Command line interface: python -m farmsim <command> [options]

Exit codes: 0 success, 2 partial (unconverged or not certified cells), 1 error.
"""

import argparse
import logging
from pathlib import Path
from typing import Any, Sequence

from farmsim.cli.commands import COMMAND_DEFAULTS, COMMANDS, EXIT_ERROR, CommandContext, output_dir
from farmsim.cli.experiment import ExperimentConfig, TraceSettings, load_experiment
from farmsim.cli.output import ResultWriter
from farmsim.exceptions import FarmSimException
from farmsim.model import DISTRIBUTION_CHOICES, Discipline, GeneratorMode, TieBreak
from farmsim_commons.config import ensure_config_loaded
from farmsim_commons.logging_utils import log_duration, log_exception, setup_script_logging
from farmsim_commons.metric_utils import setup_default_metrics

logger = logging.getLogger("farmsim")


def int_list(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Experiment file (yaml or json)")
    common.add_argument("--scenario", action="append", dest="scenarios", metavar="FIXTURE",
                        help="Scenario fixture name or file, can be repeated")
    common.add_argument("--h", type=int_list, help="Scaling parameters, e.g. 1,10,20")
    common.add_argument("--seed", type=int, help="Base seed of all random streams")
    common.add_argument("--reps", type=int, help="Replications per cell (initial batch)")
    common.add_argument("--max-reps", type=int, dest="max_reps", help="Upper limit when extending replications")
    common.add_argument("--horizon", type=float, help="Simulated time per replication")
    common.add_argument("--warmup", type=float, help="Discarded initial time (default: fraction of the horizon)")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--policy", action="append", dest="policies", metavar="{pas,jsq}", help="Can be repeated")
    common.add_argument("--discipline", action="append", dest="disciplines", choices=[d.value for d in Discipline])
    common.add_argument("--tie", action="append", dest="ties", choices=[t.value for t in TieBreak])
    common.add_argument("--dist", action="append", dest="distributions", choices=DISTRIBUTION_CHOICES)
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="farmsim", description="Energy-efficient job assignment in server farms")
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("simulate", parents=[common], help="Simulate every cell of an experiment")
    subparsers.add_parser("sweep-h", parents=[common], help="Deviation from the asymptotic optimum against h")
    subparsers.add_parser("benchmark", parents=[common], help="Asymptotic optimum and heavy traffic check")

    generate = subparsers.add_parser("generate", parents=[common], help="Draw random scenario files")
    generate.add_argument("--count", type=int)
    generate.add_argument("--K", type=int, dest="K", help="Number of server groups")
    generate.add_argument("--J", type=int, dest="J", help="Number of job types")
    generate.add_argument("--rho", type=float, help="Normalized offered traffic")
    generate.add_argument("--mode", choices=[m.value for m in GeneratorMode])
    generate.add_argument("--buffer", type=int)
    generate.add_argument("--base-count", type=int, dest="base_count")
    generate.add_argument("--heavy-traffic", action="store_true", dest="heavy_traffic",
                          help="Redraw until the heavy traffic condition holds at the first --h")
    generate.add_argument("--format", choices=["yaml", "json"], default="yaml")

    trace = subparsers.add_parser("trace", parents=[common], help="Hourly case study on a trace or rate profile")
    trace.add_argument("--trace", type=Path, dest="trace_file", help="Trace CSV (timestamp_s,type_id)")
    trace.add_argument("--profile", type=Path, help="Rate profile CSV (type,hour_index,rate_per_s)")
    trace.add_argument("--resample", action="store_true", help="Poisson arrivals from the trace's hourly rates")
    trace.add_argument("--buffer", type=int, action="append", dest="buffers", help="Buffer override, can be repeated")
    return parser


def experiment_overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "scenarios": args.scenarios,
        "h": args.h,
        "seed": args.seed,
        "reps": args.reps,
        "max_reps": args.max_reps,
        "horizon": args.horizon,
        "warmup": args.warmup,
        "output_dir": str(args.out) if args.out is not None else None,
        "policies": args.policies,
        "disciplines": args.disciplines,
        "ties": args.ties,
        "distributions": args.distributions,
    }


def _apply_trace_flags(args: argparse.Namespace, experiment: ExperimentConfig) -> None:
    trace = experiment.trace or TraceSettings()
    if args.trace_file is not None:
        trace.file = str(args.trace_file.absolute())
    if args.profile is not None:
        trace.profile = str(args.profile.absolute())
    if args.resample:
        trace.resample = True
    if args.buffers:
        trace.buffers = list(args.buffers)
    experiment.trace = trace


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_script_logging("farmsim", verbosity=args.verbose)
    try:
        cfg = ensure_config_loaded()
        cfg.validate()
        setup_default_metrics()
        experiment = load_experiment(args.config, experiment_overrides(args), COMMAND_DEFAULTS[args.command])
        if args.command == "trace":
            _apply_trace_flags(args, experiment)
        writer = ResultWriter(output_dir(experiment, cfg), cfg.OUTPUT.gnuplot)
        ctx = CommandContext(cfg, experiment, writer, cfg.THREADS)
        with log_duration(logger, f"{args.command} finished in {{:.1f}} seconds"):
            code = COMMANDS[args.command](ctx, args)
        if code:
            logger.warning("%s finished with exit code %d (see the status column)", args.command, code)
        return code
    except FarmSimException as e:
        log_exception(logger, e)
        return EXIT_ERROR
    except ValueError as e:
        log_exception(logger, e, "Invalid configuration: {}: {}")
        return EXIT_ERROR
    except Exception:
        logger.exception("Unexpected error")
        return EXIT_ERROR
