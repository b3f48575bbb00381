"""
Independent simulation cells (one scenario variant, one policy) and the worker pool running them.
Results come back in submission order and are written by the calling process only.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Iterator, Sequence

from farmsim.engine.arrivals import Arrival, SeedLike
from farmsim.engine.metrics import AggregateMetrics
from farmsim.engine.replication import ArrivalFactory, RunSettings, replication_seed, replications
from farmsim.exceptions import FarmSimException
from farmsim.model import Scenario
from farmsim.trace import RateProfile, TraceArrival, nhpp, replay
from farmsim_commons.config import Config, ensure_config_loaded, set_current_config
from farmsim_commons.logging_utils import log_exception
from farmsim_commons.metric_utils import setup_default_metrics

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReplayArrivals:
    """Every replication sees the same recorded arrivals."""

    arrivals: tuple[TraceArrival, ...]

    def __call__(self, seed: SeedLike) -> Iterator[Arrival]:
        return replay(self.arrivals)


@dataclass(frozen=True)
class ProfileArrivals:
    profile: RateProfile

    def __call__(self, seed: SeedLike) -> Iterator[Arrival]:
        return nhpp(self.profile, seed)


@dataclass(frozen=True)
class Cell:
    fixture_id: str
    scenario: Scenario
    policy: str
    dist: str
    seed: int
    settings: RunSettings
    buffer: int | None = None
    arrivals: ArrivalFactory | None = None
    # run exactly settings.reps replications instead of extending until the target precision
    fixed_reps: bool = False

    def labels(self) -> dict[str, Any]:
        labels: dict[str, Any] = {
            "fixture_id": self.fixture_id,
            "seed": self.seed,
            "policy": self.policy,
            "discipline": str(self.scenario.discipline),
            "tie": str(self.scenario.tie_break),
            "dist": self.dist,
            "h": self.scenario.h,
        }
        if self.buffer is not None:
            labels["buffer"] = self.buffer
        return labels

    def describe(self) -> str:
        return " ".join(f"{k}={v}" for k, v in self.labels().items())


@dataclass
class CellResult:
    cell: Cell
    aggregate: AggregateMetrics | None
    error: str | None
    wall: float


def run_cell(cell: Cell) -> CellResult:
    t = time.time()
    settings = cell.settings
    try:
        if cell.fixed_reps:
            seeds = [replication_seed(cell.seed, i) for i in range(settings.reps)]
            aggregate = replications(cell.scenario, cell.policy, settings.reps, seeds, settings, cell.arrivals)
        else:
            aggregate = replications(cell.scenario, cell.policy, settings.reps, cell.seed, settings, cell.arrivals)
    except FarmSimException as e:
        log_exception(logger, e, f"Cell {cell.describe()} failed: {{}}: {{}}")
        return CellResult(cell, None, f"{e.__class__.__name__}: {e}", time.time() - t)
    wall = time.time() - t
    logger.debug("Cell %s: %d replications in %.1fs", cell.describe(), aggregate.n_reps, wall)
    return CellResult(cell, aggregate, None, wall)


def _init_worker(cfg: Config) -> None:
    set_current_config(cfg)
    setup_default_metrics()


def run_cells(cells: Sequence[Cell], threads: int) -> list[CellResult]:
    """Runs the cells on at most `threads` worker processes. One thread runs everything in this process."""
    if threads <= 1 or len(cells) <= 1:
        return [run_cell(cell) for cell in cells]
    cfg = ensure_config_loaded()
    with ProcessPoolExecutor(max_workers=min(threads, len(cells)), initializer=_init_worker, initargs=(cfg,)) as executor:
        return list(executor.map(run_cell, cells))
