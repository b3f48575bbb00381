"""
Experiment files: which scenarios to run, with which policies, disciplines, tie rules, scales and size distributions.

A yaml/json experiment file looks like:

    name: case-i-sweep
    scenarios: [case_i]            # fixture names or paths
    generator:                     # alternatively / additionally: random scenarios
      mode: single_type
      count: 50
    policies: [pas, jsq]
    h: [1, 10, 20]
    seed: 7

Command line flags override the file.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Self

import yaml

from farmsim.engine.replication import RunSettings
from farmsim.exceptions import ConfigurationError, FarmSimException
from farmsim.fluid.indices import availability_load
from farmsim.model import (
    DISTRIBUTION_CHOICES,
    Discipline,
    GeneratorMode,
    Scenario,
    TieBreak,
    at_scale,
    generate_scenario,
    load_scenario,
    resolve_fixture,
)
from farmsim.model.scenario_file import ScenarioModel
from farmsim_commons.config import Config, ConfigSection, clean_comments

logger = logging.getLogger(__name__)

MAX_CERTIFICATION_ATTEMPTS = 1000


@dataclass
class GeneratorSettings(ConfigSection):
    seed: int = 1
    count: int = 1
    K: int = 5
    J: int = 1
    rho: float = 0.6
    mode: str = GeneratorMode.SINGLE_TYPE.value
    buffer: int = 2
    base_count: int = 1
    # redraw multi-type scenarios until the heavy traffic condition holds at this scale
    heavy_traffic_h: int | None = None


@dataclass
class DiurnalSettings(ConfigSection):
    # job type id => mean arrival rate per second; defaults to the scenario's arrival rates
    mean_rates: dict[int, float] = field(default_factory=dict)
    hours: int = 24
    amplitude: float = 0.5
    peak_hour: float = 14.0
    sharpness: float = 1.0
    noise: float = 0.0

    def __post_init__(self) -> None:
        # json object keys are strings
        self.mean_rates = {int(j): float(rate) for j, rate in self.mean_rates.items()}


@dataclass
class TraceSettings(ConfigSection):
    # trace CSV (timestamp_s,type_id), relative to the experiment file
    file: str | None = None
    # rate profile CSV (type,hour_index,rate_per_s)
    profile: str | None = None
    # resample a trace file as a non-homogeneous Poisson process of its hourly rates
    resample: bool = False
    diurnal: DiurnalSettings | None = None
    buffers: list[int] = field(default_factory=list)
    bucket_width: float = 3600.0
    # the trace or profile is played `repeat` times back to back, the first `warmup_periods` copies are discarded
    repeat: int = 1
    warmup_periods: int = 0

    def __post_init__(self) -> None:
        if self.repeat < 1 or not 0 <= self.warmup_periods < self.repeat:
            raise ValueError(f"need 0 <= warmup_periods < repeat, got {self.warmup_periods} and {self.repeat}")


@dataclass
class ExperimentConfig(ConfigSection):
    name: str = "experiment"
    scenarios: list[str] = field(default_factory=list)
    generator: GeneratorSettings | None = None
    policies: list[str] = field(default_factory=lambda: ["pas"])
    disciplines: list[str] = field(default_factory=list)
    ties: list[str] = field(default_factory=list)
    h: list[int] = field(default_factory=lambda: [1])
    # empty: job sizes as given in the scenario
    distributions: list[str] = field(default_factory=list)
    seed: int = 1
    reps: int | None = None
    max_reps: int | None = None
    horizon: float | None = None
    warmup: float | None = None
    bucket_width: float | None = None
    output_dir: str | None = None
    trace: TraceSettings | None = None
    basedir: str = "."

    @classmethod
    def from_dict(cls, d: dict) -> Self:
        d = dict(d)
        clean_comments(d)
        nested: dict[str, Any] = {}
        if d.get("generator") is not None:
            nested["generator"] = GeneratorSettings.from_dict(d.pop("generator"))
        if d.get("trace") is not None:
            trace = dict(d.pop("trace"))
            if trace.get("diurnal") is not None:
                trace["diurnal"] = DiurnalSettings.from_dict(trace["diurnal"])
            nested["trace"] = TraceSettings.from_dict(trace)
        try:
            return super().from_dict(d | nested)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid experiment configuration: {e}") from e

    def validate(self) -> None:
        if not self.h:
            raise ConfigurationError("Experiment needs at least one value of h")
        if any(isinstance(h, bool) or not isinstance(h, int) or h < 1 for h in self.h):
            raise ConfigurationError(f"Values of h must be integers >= 1, got {self.h}")
        if not self.policies:
            raise ConfigurationError("Experiment needs at least one policy")
        for d in self.distributions:
            if d not in DISTRIBUTION_CHOICES:
                raise ConfigurationError(f'Unknown size distribution "{d}"')
        try:
            [Discipline(d) for d in self.disciplines]
            [TieBreak(t) for t in self.ties]
            if self.generator is not None:
                GeneratorMode(self.generator.mode)
        except ValueError as e:
            raise ConfigurationError(str(e)) from e
        if self.reps is not None and self.reps < 2:
            raise ConfigurationError("reps must be at least 2 for a t-interval")

    def path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else Path(self.basedir) / p

    def run_settings(self, cfg: Config, **defaults: Any) -> RunSettings:
        """Simulation settings: experiment values, then command defaults, then the global config."""
        values = {k: v for k, v in defaults.items() if v is not None}
        values.update({
            k: v for k, v in (("horizon", self.horizon), ("warmup", self.warmup), ("reps", self.reps),
                              ("max_reps", self.max_reps), ("bucket_width", self.bucket_width))
            if v is not None
        })
        settings = RunSettings.from_config(cfg.SIMULATION, **values)
        if settings.max_reps < settings.reps:
            settings = replace(settings, max_reps=settings.reps)
        if not 0 <= settings.effective_warmup < settings.horizon:
            raise ConfigurationError(f"Need 0 <= warmup < horizon, got {settings.effective_warmup} and {settings.horizon}")
        return settings

    def provenance_dict(self) -> dict[str, Any]:
        """Everything that determines results. The output location does not."""
        d = self.to_dict()
        d.pop("output_dir", None)
        d.pop("basedir", None)
        return d


def load_experiment(path: Path | None, overrides: dict[str, Any] | None = None,
                    defaults: dict[str, Any] | None = None) -> ExperimentConfig:
    """Command line overrides win over the file, which wins over the command's defaults."""
    d: dict[str, Any] = dict(defaults or {})
    if path is not None:
        try:
            with path.open() as f:
                loaded = (json.load(f) if path.suffix == ".json" else yaml.safe_load(f)) or {}
        except OSError as e:
            raise ConfigurationError(f"Cannot read experiment file {path}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"{path}: expected a mapping at top level")
        d.update(loaded)
        d.setdefault("name", path.stem)
        d["basedir"] = str(path.absolute().parent)
    for k, v in (overrides or {}).items():
        if v is not None:
            d[k] = v
    experiment = ExperimentConfig.from_dict(d)
    experiment.validate()
    return experiment


@dataclass(frozen=True)
class ScenarioSource:
    """A base scenario (h = 1) and the identifier rows refer to it by."""

    fixture_id: str
    scenario: Scenario
    seed: int | None = None


def generate_certified(settings: GeneratorSettings, seed: int) -> tuple[Scenario, int]:
    """
    Draw from successive seeds until the heavy traffic condition holds at scale settings.heavy_traffic_h.
    Returns the scenario and the seed that produced it.
    """
    h = settings.heavy_traffic_h or 1
    for attempt in range(MAX_CERTIFICATION_ATTEMPTS):
        scenario = generate_scenario(seed + attempt, settings.K, settings.J, settings.rho, settings.mode,
                                     settings.buffer, settings.base_count)
        if settings.mode == GeneratorMode.SINGLE_TYPE or availability_load(at_scale(scenario, h)).heavy_traffic:
            if attempt:
                logger.debug("seed %d: heavy traffic after %d redraws", seed, attempt)
            return scenario, seed + attempt
    raise ConfigurationError(f"No scenario with heavy traffic at h={h} within {MAX_CERTIFICATION_ATTEMPTS} seeds from {seed}")


def generated_sources(settings: GeneratorSettings) -> list[ScenarioSource]:
    sources = []
    seed = settings.seed
    for _ in range(settings.count):
        if settings.heavy_traffic_h is not None:
            scenario, used = generate_certified(settings, seed)
        else:
            scenario, used = generate_scenario(seed, settings.K, settings.J, settings.rho, settings.mode,
                                               settings.buffer, settings.base_count), seed
        sources.append(ScenarioSource(scenario.name, scenario, used))
        seed = used + 1
    return sources


def resolve_sources(experiment: ExperimentConfig, cfg: Config, default: str | None = None) -> list[ScenarioSource]:
    names = list(experiment.scenarios)
    if not names and experiment.generator is None and default is not None:
        names = [default]
    sources = []
    for name in names:
        candidate = experiment.path(name)
        path = candidate if candidate.is_file() else resolve_fixture(name, cfg.FIXTURES_PATH)
        scenario = load_scenario(path)
        sources.append(ScenarioSource(scenario.name, scenario))
    if experiment.generator is not None:
        sources.extend(generated_sources(experiment.generator))
    if not sources:
        raise ConfigurationError("No scenarios: give --scenario, a scenarios list or a generator section")
    return sources


def config_hash(experiment: ExperimentConfig, sources: list[ScenarioSource], settings: RunSettings) -> str:
    """Short digest of everything that determines the results of an experiment."""
    payload = {
        "experiment": experiment.provenance_dict(),
        "settings": {f.name: getattr(settings, f.name) for f in fields(settings)},
        "scenarios": {s.fixture_id: ScenarioModel.from_scenario(s.scenario).model_dump(mode="json") for s in sources},
    }
    try:
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    except (TypeError, ValueError) as e:
        raise FarmSimException(f"Cannot hash experiment: {e}") from e
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]
