import logging
from dataclasses import dataclass, replace
from typing import Callable, Iterator, Sequence

from farmsim.engine.arrivals import Arrival, SeedLike
from farmsim.engine.metrics import AggregateMetrics, ReplicationMetrics
from farmsim.engine.simulation import run
from farmsim.exceptions import ConfigurationError
from farmsim.model import Scenario
from farmsim_commons.config import SimulationConfig
from farmsim_commons.metric_utils import Metrics

logger = logging.getLogger(__name__)

ArrivalFactory = Callable[[SeedLike], Iterator[Arrival]]


@dataclass(frozen=True)
class RunSettings:
    horizon: float
    warmup: float | None = None
    warmup_fraction: float = 0.1
    reps: int = 5
    max_reps: int = 40
    target_rel_halfwidth: float = 0.03
    confidence: float = 0.95
    bucket_width: float | None = None

    @classmethod
    def from_config(cls, cfg: SimulationConfig, **overrides: object) -> "RunSettings":
        settings = cls(
            horizon=cfg.horizon,
            warmup_fraction=cfg.warmup_fraction,
            reps=cfg.reps,
            max_reps=cfg.max_reps,
            target_rel_halfwidth=cfg.target_rel_halfwidth,
            confidence=cfg.confidence,
        )
        return replace(settings, **{k: v for k, v in overrides.items() if v is not None})  # type: ignore[arg-type]

    @property
    def effective_warmup(self) -> float:
        """Default warmup: a fixed fraction of the horizon."""
        return self.warmup if self.warmup is not None else self.warmup_fraction * self.horizon


def replication_seed(base_seed: int, index: int) -> tuple[int, int]:
    return base_seed, index


def run_replication(scenario: Scenario, policy: str, seed: SeedLike, settings: RunSettings,
                    arrivals: ArrivalFactory | None = None) -> ReplicationMetrics:
    with Metrics.measure("replication", policy=policy, discipline=str(scenario.discipline), tie=str(scenario.tie_break),
                         h=scenario.h, scenario=scenario.name, seed=seed) as measurement:
        result = run(scenario, policy, settings.effective_warmup, settings.horizon, seed,
                     arrivals=arrivals(seed) if arrivals is not None else None, bucket_width=settings.bucket_width)
        measurement.fields |= {"L": result.throughput, "E": result.power, "EE": result.energy_efficiency,
                               "events": result.events}
    return result


def replications(scenario: Scenario, policy: str, n_reps: int, seeds: int | Sequence[SeedLike],
                 settings: RunSettings, arrivals: ArrivalFactory | None = None) -> AggregateMetrics:
    """
    Independent replications aggregated into means with Student-t half-widths.

    With a base seed, replication i uses seed (base, i) and further replications are added in batches of n_reps
    until L, E and EE all have a half-width of at most target_rel_halfwidth of their mean, or settings.max_reps is reached.
    An explicit seed list runs exactly those replications.
    """
    if n_reps < 2:
        raise ConfigurationError(f"Need at least 2 replications for a confidence interval, got {n_reps}")
    if isinstance(seeds, int):
        base_seed = seeds
        runs: list[ReplicationMetrics] = []
        target = n_reps
        while True:
            for i in range(len(runs), target):
                runs.append(run_replication(scenario, policy, replication_seed(base_seed, i), settings, arrivals))
            aggregate = AggregateMetrics.aggregate(runs, settings.confidence, settings.target_rel_halfwidth)
            if aggregate.converged or target >= settings.max_reps:
                break
            target = min(settings.max_reps, target + n_reps)
            logger.debug("%s/%s h=%d: extending to %d replications", scenario.name, policy, scenario.h, target)
    else:
        runs = [run_replication(scenario, policy, seed, settings, arrivals) for seed in seeds]
        aggregate = AggregateMetrics.aggregate(runs, settings.confidence, settings.target_rel_halfwidth)
    if not aggregate.converged:
        logger.warning("%s/%s h=%d did not reach the target precision after %d replications (EE %.5f +- %.5f)",
                       scenario.name, policy, scenario.h, aggregate.n_reps, aggregate.EE.mean, aggregate.EE.half_width)
    return aggregate
