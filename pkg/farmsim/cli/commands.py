import logging
import math
from argparse import Namespace
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from farmsim.cli.cells import Cell, CellResult, ProfileArrivals, ReplayArrivals, run_cells
from farmsim.cli.experiment import (
    DiurnalSettings,
    ExperimentConfig,
    GeneratorSettings,
    ScenarioSource,
    TraceSettings,
    config_hash,
    generated_sources,
    resolve_sources,
)
from farmsim.cli.output import ResultWriter, Row
from farmsim.engine.metrics import Estimate
from farmsim.engine.replication import ArrivalFactory, RunSettings
from farmsim.exceptions import ConfigurationError, FluidConvergenceError
from farmsim.fluid import BenchmarkResult, availability_load, normalized_deviation, opt_energy_efficiency
from farmsim.model import (
    Scenario,
    at_scale,
    save_scenario,
    with_buffer,
    with_policy_options,
    with_size_distribution,
)
from farmsim.trace import (
    RateProfile,
    diurnal_profile,
    hourly_rates,
    read_rate_profile,
    read_trace,
    tile_arrivals,
    write_rate_profile,
)
from farmsim_commons.config import Config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2

# size distribution label of cells that keep the scenario's own job sizes
SCENARIO_SIZES = "scenario"


@dataclass
class CommandContext:
    cfg: Config
    experiment: ExperimentConfig
    writer: ResultWriter
    threads: int


def exit_code(statuses: Iterable[str]) -> int:
    statuses = list(statuses)
    if "error" in statuses:
        return EXIT_ERROR
    if any(s != "ok" for s in statuses):
        return EXIT_PARTIAL
    return EXIT_OK


def _check_policies(ctx: CommandContext) -> None:
    unknown = [p for p in ctx.experiment.policies if p not in ctx.cfg.POLICIES]
    if unknown:
        raise ConfigurationError(f'Unknown policies {", ".join(unknown)}, configured: {", ".join(sorted(ctx.cfg.POLICIES))}')


def _benchmark(scenario: Scenario) -> BenchmarkResult | None:
    try:
        return opt_energy_efficiency(scenario)
    except FluidConvergenceError as e:
        logger.warning("No benchmark for %s: %s", scenario.name, e)
        return None


def _variants(experiment: ExperimentConfig, scenario: Scenario) -> list[tuple[str, Scenario]]:
    """(size distribution label, scenario) for every distribution, discipline and tie rule of the experiment."""
    variants = []
    for dist in experiment.distributions or [SCENARIO_SIZES]:
        sized = scenario if dist == SCENARIO_SIZES else with_size_distribution(scenario, dist)
        for discipline in experiment.disciplines or [None]:
            for tie in experiment.ties or [None]:
                variants.append((dist, with_policy_options(sized, discipline, tie)))
    return variants


def _grid(experiment: ExperimentConfig, sources: list[ScenarioSource], settings: RunSettings) -> list[Cell]:
    return [
        Cell(source.fixture_id, at_scale(variant, h), policy, dist, experiment.seed, settings)
        for source in sources
        for dist, variant in _variants(experiment, source.scenario)
        for h in experiment.h
        for policy in experiment.policies
    ]


def _estimate_columns(name: str, estimate: Estimate | None) -> dict[str, Any]:
    if estimate is None:
        return {name: None, f"{name}_hw": None}
    return {name: estimate.mean, f"{name}_hw": estimate.half_width}


def _cell_row(result: CellResult, chash: str, benchmark: BenchmarkResult | None) -> dict[str, Any]:
    cell, aggregate = result.cell, result.aggregate
    row: dict[str, Any] = cell.labels() | {"config_hash": chash}
    certified = len(cell.scenario.job_types) == 1 or availability_load(cell.scenario).heavy_traffic
    estimates: dict[str, Estimate] = aggregate.estimates if aggregate is not None else {}
    get = estimates.get
    row |= {"n_reps": aggregate.n_reps if aggregate is not None else 0}
    for name in ("L", "E", "EE", "blocking"):
        row |= _estimate_columns(name, get(name))
    completion = get("completion_rate")
    row["completion_rate"] = completion.mean if completion is not None else None

    ee_opt = benchmark.ee_opt if benchmark is not None else None
    deviation = deviation_hw = log_deviation = None
    ee = get("EE")
    if ee_opt is not None and ee_opt > 0 and ee is not None:
        deviation = normalized_deviation(ee_opt, ee.mean)
        deviation_hw = ee.half_width / ee_opt
        log_deviation = math.log(deviation) if deviation > 0 else None
    converged = aggregate is not None and aggregate.converged
    if result.error is not None:
        status = "error"
    elif not converged:
        status = "unconverged"
    elif benchmark is None or not certified:
        status = "not-certified"
    else:
        status = "ok"
    row |= {
        "ee_opt": ee_opt,
        "deviation": deviation,
        "deviation_hw": deviation_hw,
        "log_deviation": log_deviation,
        "certified": certified,
        "approximate": not cell.scenario.is_exponential,
        "converged": converged,
        "status": status,
        "error": result.error,
    }
    return row


def _add_rel_diff_vs_exp(rows: list[dict[str, Any]]) -> None:
    """(EE_D - EE_exp) / EE_exp against the exponential cell with otherwise identical labels."""
    def key(row: Row) -> tuple:
        return row["fixture_id"], row["policy"], row["discipline"], row["tie"], row["h"]

    reference = {key(row): row["EE"] for row in rows if row["dist"] == "exp"}
    for row in rows:
        ee_exp = reference.get(key(row))
        if ee_exp is None or row["EE"] is None or ee_exp <= 0:
            row["rel_diff_vs_exp"] = None
        else:
            row["rel_diff_vs_exp"] = (row["EE"] - ee_exp) / ee_exp


def _run_grid(ctx: CommandContext) -> tuple[list[dict[str, Any]], list[ScenarioSource]]:
    _check_policies(ctx)
    experiment = ctx.experiment
    sources = resolve_sources(experiment, ctx.cfg)
    settings = experiment.run_settings(ctx.cfg)
    chash = config_hash(experiment, sources, settings)
    benchmarks = {source.fixture_id: _benchmark(source.scenario) for source in sources}
    cells = _grid(experiment, sources, settings)
    logger.info("Running %d cells on %d workers (config %s)", len(cells), min(ctx.threads, len(cells)), chash)
    results = run_cells(cells, ctx.threads)
    rows = [_cell_row(result, chash, benchmarks[result.cell.fixture_id]) for result in results]
    _add_rel_diff_vs_exp(rows)
    return rows, sources


def _cdf_blocks(rows: list[dict[str, Any]], column: str,
                labels: Sequence[str] = ("policy", "discipline", "tie", "dist", "h")) -> list[tuple[str, tuple, list]]:
    """Empirical distribution of a column over all scenarios, one block per combination of the labels."""
    distributions: dict[tuple, list[float]] = {}
    for row in rows:
        if row[column] is not None:
            distributions.setdefault(tuple(row[label] for label in labels), []).append(row[column])
    blocks = []
    for k, values in distributions.items():
        values.sort()
        n = len(values)
        title = " ".join(f"{label}={value}" for label, value in zip(labels, k))
        blocks.append((title, (column, "cdf"), [(v, (i + 1) / n) for i, v in enumerate(values)]))
    return blocks


def cmd_simulate(ctx: CommandContext, args: Namespace) -> int:
    rows, _ = _run_grid(ctx)
    ctx.writer.write_csv("simulate", rows)
    blocks = _cdf_blocks([row for row in rows if row["dist"] != "exp"], "rel_diff_vs_exp")
    if blocks:
        ctx.writer.write_dat("simulate_cdf", blocks)
        for title, _, points in blocks:
            logger.info("%s: %d scenarios, largest relative EE change %.4f", title, len(points),
                        max(abs(v) for v, _ in points))
    return exit_code(row["status"] for row in rows)


def cmd_sweep_h(ctx: CommandContext, args: Namespace) -> int:
    rows, sources = _run_grid(ctx)
    ctx.writer.write_csv("sweep_h", rows)

    curves = {}
    for row in rows:
        curve_key = (row["fixture_id"], row["policy"], row["discipline"], row["tie"], row["dist"])
        curves.setdefault(curve_key, []).append((row["h"], row["deviation"], row["deviation_hw"], row["log_deviation"]))
    ctx.writer.write_dat("sweep_h", [
        (" ".join(map(str, k)), ("h", "deviation", "deviation_hw", "log_deviation"), sorted(points))
        for k, points in curves.items()
    ])

    # empirical distribution of the deviation over all scenarios, per h
    blocks = _cdf_blocks(rows, "deviation")
    for title, _, points in blocks:
        n = len(points)
        logger.info("%s: %d scenarios, max deviation %.4f, %.0f%% within 3%%",
                    title, n, points[-1][0], 100 * sum(d <= 0.03 for d, _ in points) / n)
    ctx.writer.write_dat("sweep_h_cdf", blocks)
    return exit_code(row["status"] for row in rows)


def cmd_benchmark(ctx: CommandContext, args: Namespace) -> int:
    experiment = ctx.experiment
    sources = resolve_sources(experiment, ctx.cfg)
    settings = experiment.run_settings(ctx.cfg)
    chash = config_hash(experiment, sources, settings)
    rows: list[dict[str, Any]] = []
    states: list[dict[str, Any]] = []
    for source in sources:
        for _, variant in _variants(experiment, source.scenario):
            benchmark = _benchmark(variant)
            for h in experiment.h:
                scaled = at_scale(variant, h)
                load = availability_load(scaled)
                certified = load.heavy_traffic or len(variant.job_types) == 1
                row: dict[str, Any] = {
                    "fixture_id": source.fixture_id,
                    "config_hash": chash,
                    "seed": source.seed,
                    "discipline": str(variant.discipline),
                    "tie": str(variant.tie_break),
                    "h": h,
                    "ee_opt": benchmark.ee_opt if benchmark is not None else None,
                    "throughput": benchmark.throughput * h if benchmark is not None else None,
                    "power": benchmark.power * h if benchmark is not None else None,
                    "heavy_traffic": load.heavy_traffic,
                    "certified": certified,
                    "approximate": not variant.is_exponential,
                }
                row |= {f"A_{j}": a for j, a in sorted(load.load.items())}
                if benchmark is not None:
                    row |= {f"index_{k}": v for k, v in sorted(benchmark.indices.items())}
                row["status"] = "unconverged" if benchmark is None else ("ok" if certified else "not-certified")
                rows.append(row)
            if benchmark is not None:
                for state, z in zip(benchmark.z_star.ordering.states, benchmark.z_star.z):
                    states.append({
                        "fixture_id": source.fixture_id,
                        "config_hash": chash,
                        "tie": str(variant.tie_break),
                        "group": state.group,
                        "occupancy": state.occupancy,
                        "controllable": state.controllable,
                        "z": float(z),
                    })
    ctx.writer.write_csv("benchmark", rows)
    ctx.writer.write_csv("benchmark_states", states)
    return exit_code(row["status"] for row in rows)


def cmd_generate(ctx: CommandContext, args: Namespace) -> int:
    experiment = ctx.experiment
    settings = experiment.generator or GeneratorSettings(seed=experiment.seed)
    overrides = {
        "seed": args.seed, "count": args.count, "K": args.K, "J": args.J, "rho": args.rho, "mode": args.mode,
        "buffer": args.buffer, "base_count": args.base_count,
    }
    settings = GeneratorSettings.from_dict(settings.to_dict() | {k: v for k, v in overrides.items() if v is not None})
    if args.heavy_traffic:
        settings.heavy_traffic_h = experiment.h[0]
    sources = generated_sources(settings)
    ctx.writer.output_dir.mkdir(parents=True, exist_ok=True)
    chash = config_hash(experiment, sources, experiment.run_settings(ctx.cfg))
    rows = []
    for source in sources:
        scenario = with_policy_options(
            source.scenario,
            experiment.disciplines[0] if experiment.disciplines else None,
            experiment.ties[0] if experiment.ties else None,
        )
        path = ctx.writer.output_dir / f"{scenario.name}.{args.format}"
        save_scenario(scenario, path)
        load = availability_load(at_scale(scenario, settings.heavy_traffic_h or experiment.h[0]))
        rows.append({
            "fixture_id": source.fixture_id,
            "config_hash": chash,
            "seed": source.seed,
            "file": path.name,
            "mode": settings.mode,
            "K": settings.K,
            "J": len(scenario.job_types),
            "rho": settings.rho,
            "h": settings.heavy_traffic_h or experiment.h[0],
            "max_A": max(load.load.values()),
            "heavy_traffic": load.heavy_traffic,
        })
        logger.info("Generated %s", path)
    ctx.writer.write_csv("generated", rows)
    return EXIT_OK


@dataclass(frozen=True)
class TraceInput:
    """Arrivals of a trace cell and the single period (e.g. a day) they were built from."""

    arrivals: ArrivalFactory
    profile: RateProfile
    period: float


def _trace_arrivals(experiment: ExperimentConfig, scenario: Scenario) -> TraceInput:
    trace = experiment.trace or TraceSettings()
    type_ids = set(scenario.type_ids)
    if trace.file is not None:
        parsed = read_trace(experiment.path(trace.file), type_ids)
        profile = hourly_rates(parsed.arrivals, sorted(type_ids), bucket_width=trace.bucket_width)
        if trace.resample:
            return TraceInput(ProfileArrivals(profile.tile(trace.repeat)), profile, profile.duration)
        tiled = tile_arrivals(parsed.arrivals, profile.duration, trace.repeat)
        return TraceInput(ReplayArrivals(tuple(tiled)), profile, profile.duration)
    if trace.profile is not None:
        profile = read_rate_profile(experiment.path(trace.profile))
    else:
        diurnal = trace.diurnal or DiurnalSettings()
        mean_rates = diurnal.mean_rates or {j: scenario.arrival_rate(j) for j in scenario.type_ids}
        profile = diurnal_profile(mean_rates, diurnal.hours, diurnal.amplitude, diurnal.peak_hour,
                                  diurnal.sharpness, diurnal.noise, experiment.seed)
    unknown = set(profile.rates) - type_ids
    if unknown:
        raise ConfigurationError(f"Rate profile references unknown job types {sorted(unknown)}")
    return TraceInput(ProfileArrivals(profile.tile(trace.repeat)), profile, profile.duration)


def cmd_trace(ctx: CommandContext, args: Namespace) -> int:
    _check_policies(ctx)
    experiment = ctx.experiment
    trace = experiment.trace or TraceSettings()
    sources = resolve_sources(experiment, ctx.cfg, default="ten_group_trace")
    ctx.writer.output_dir.mkdir(parents=True, exist_ok=True)

    cells: list[Cell] = []
    hashes: dict[str, str] = {}
    for source in sources:
        source_input = _trace_arrivals(experiment, source.scenario)
        if source_input.period <= 0:
            raise ConfigurationError(f"Empty arrival trace for {source.fixture_id}")
        # only the last (repeat - warmup_periods) copies of the period are observed
        settings = experiment.run_settings(
            ctx.cfg,
            horizon=source_input.period * trace.repeat,
            warmup=source_input.period * trace.warmup_periods,
            bucket_width=trace.bucket_width,
        )
        hashes[source.fixture_id] = config_hash(experiment, [source], settings)
        name = "trace_profile.csv" if len(sources) == 1 else f"trace_profile_{source.fixture_id}.csv"
        write_rate_profile(source_input.profile, ctx.writer.output_dir / name)
        for buffer in trace.buffers or [None]:
            scenario = with_buffer(source.scenario, buffer) if buffer is not None else source.scenario
            for dist, variant in _variants(experiment, scenario):
                for h in experiment.h:
                    for policy in experiment.policies:
                        cells.append(Cell(source.fixture_id, at_scale(variant, h), policy, dist, experiment.seed, settings,
                                          buffer=buffer, arrivals=source_input.arrivals, fixed_reps=True))

    logger.info("Running %d trace cells on %d workers", len(cells), min(ctx.threads, len(cells)))
    results = run_cells(cells, ctx.threads)

    hourly: list[dict[str, Any]] = []
    summary: list[dict[str, Any]] = []
    blocks = []
    for result in results:
        cell, aggregate = result.cell, result.aggregate
        labels = cell.labels() | {"config_hash": hashes[cell.fixture_id]}
        status = "error" if aggregate is None else ("ok" if aggregate.converged else "unconverged")
        row = labels | {"n_reps": aggregate.n_reps if aggregate is not None else 0}
        for name in ("L", "E", "EE", "blocking"):
            row |= _estimate_columns(name, aggregate.estimates.get(name) if aggregate is not None else None)
        summary.append(row | {"status": status, "error": result.error})
        if aggregate is None or not aggregate.replications:
            continue
        warmup = cell.settings.effective_warmup
        points = []
        buckets = aggregate.replications[0].buckets
        hour = 0
        for bucket, estimates in zip(buckets, aggregate.bucket_estimates(cell.settings.confidence)):
            if bucket.start < warmup:
                continue
            hour_row = labels | {"hour": hour, "arrivals": estimates["arrivals"].mean}
            for name in ("L", "E", "EE", "blocking"):
                hour_row |= _estimate_columns(name, estimates[name])
            hourly.append(hour_row)
            points.append((hour, estimates["EE"].mean, estimates["L"].mean, estimates["blocking"].mean))
            hour += 1
        blocks.append((cell.describe(), ("hour", "EE", "L", "blocking"), points))
    ctx.writer.write_csv("trace", hourly)
    ctx.writer.write_csv("trace_summary", summary)
    ctx.writer.write_dat("trace", blocks)
    return exit_code(row["status"] for row in summary)


COMMANDS: dict[str, Callable[[CommandContext, Namespace], int]] = {
    "simulate": cmd_simulate,
    "sweep-h": cmd_sweep_h,
    "benchmark": cmd_benchmark,
    "generate": cmd_generate,
    "trace": cmd_trace,
}

# experiment defaults per command, the experiment file and flags override them
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": {},
    "sweep-h": {"h": [1, 10, 20]},
    "benchmark": {},
    "generate": {},
    "trace": {"policies": ["pas", "jsq"], "disciplines": ["ps", "srpt"]},
}


def output_dir(experiment: ExperimentConfig, cfg: Config) -> Path:
    return Path(experiment.output_dir or cfg.OUTPUT.output_dir)
