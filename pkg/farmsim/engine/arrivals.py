"""
Random streams, job sizes and Poisson arrivals.

Each (stream kind, job type) pair draws from its own counter-based generator (Philox) derived from the run seed,
so arrivals and sizes of one job type do not depend on anything the policy does.
Two policies simulated with the same seed see identical arrival and size sequences.
"""

import heapq
from enum import IntEnum
from typing import Iterable, Iterator, Sequence, TypeAlias

import numpy as np

from farmsim.exceptions import InvalidScenario
from farmsim.model import Scenario, SizeDistribution, SizeKind

SeedLike: TypeAlias = int | Sequence[int]
Arrival: TypeAlias = tuple[float, int]

BATCH_SIZE = 4096


class StreamKind(IntEnum):
    ARRIVALS = 0
    SIZES = 1
    NHPP = 2
    PROFILE = 3


def stream_rng(seed: SeedLike, kind: StreamKind, type_id: int) -> np.random.Generator:
    entropy = seed if isinstance(seed, int) else list(seed)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy, spawn_key=(int(kind), type_id))))


def sample_job_size(dist: SizeDistribution, rng: np.random.Generator, size: int | None = None) -> float | np.ndarray:
    """
    Unit-mean job sizes. Pareto sizes use scale x_m = (a-1)/a, drawn as x_m * (1 + Lomax(a)).
    """
    match dist.kind:
        case SizeKind.EXPONENTIAL:
            return rng.exponential(1.0, size)
        case SizeKind.PARETO_FINITE | SizeKind.PARETO_INFINITE:
            assert dist.shape is not None
            return dist.pareto_scale * (1.0 + rng.pareto(dist.shape, size))
        case SizeKind.DETERMINISTIC:
            return 1.0 if size is None else np.ones(size)
    raise InvalidScenario(f"Unknown size distribution {dist.kind}")


class SizeSampler:
    """Draws job sizes in batches."""

    def __init__(self, dist: SizeDistribution, rng: np.random.Generator, batch: int = BATCH_SIZE) -> None:
        self.dist = dist
        self.rng = rng
        self.batch = batch
        self._buffer: list[float] = []
        self._index = 0

    def __call__(self) -> float:
        if self._index >= len(self._buffer):
            self._buffer = np.asarray(sample_job_size(self.dist, self.rng, self.batch), dtype=float).tolist()
            self._index = 0
        value = self._buffer[self._index]
        self._index += 1
        return value


def poisson_arrivals(rate: float, rng: np.random.Generator, start: float = 0.0, end: float = float("inf"),
                     batch: int = BATCH_SIZE) -> Iterator[float]:
    """Arrival times of a Poisson process with the given rate on (start, end]. Rate 0 yields nothing."""
    if rate < 0:
        raise InvalidScenario(f"Arrival rate must be non-negative, got {rate}")
    if rate == 0:
        return
    t = start
    while True:
        times = t + np.cumsum(rng.exponential(1.0 / rate, batch))
        for x in times.tolist():
            if x > end:
                return
            yield x
        t = float(times[-1])


def merge_arrivals(streams: Iterable[Iterator[Arrival]]) -> Iterator[Arrival]:
    return heapq.merge(*streams)


def _tag(times: Iterator[float], type_id: int) -> Iterator[Arrival]:
    for t in times:
        yield t, type_id


def poisson_source(scenario: Scenario, seed: SeedLike) -> Iterator[Arrival]:
    """Merged Poisson arrivals of all job types at the scenario's scaled rates."""
    return merge_arrivals(
        _tag(poisson_arrivals(scenario.arrival_rate(j), stream_rng(seed, StreamKind.ARRIVALS, j)), j)
        for j in scenario.type_ids
    )
