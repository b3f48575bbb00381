import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

# statistics that must reach the target precision before replications stop
CONVERGENCE_STATISTICS = ("L", "E", "EE")


@dataclass
class BucketStats:
    """Statistics of one time bucket (an hour in trace mode), restricted to the observation window."""

    start: float
    end: float
    observed: float = 0.0
    work: float = 0.0
    energy: float = 0.0
    completed_size: float = 0.0
    arrivals: dict[int, int] = field(default_factory=dict)
    blocked: dict[int, int] = field(default_factory=dict)

    @property
    def throughput(self) -> float:
        return self.work / self.observed if self.observed > 0 else 0.0

    @property
    def power(self) -> float:
        return self.energy / self.observed if self.observed > 0 else 0.0

    @property
    def energy_efficiency(self) -> float:
        return self.work / self.energy if self.energy > 0 else 0.0

    def blocking_probability(self, job_type: int | None = None) -> float:
        if job_type is None:
            arrivals, blocked = sum(self.arrivals.values()), sum(self.blocked.values())
        else:
            arrivals, blocked = self.arrivals.get(job_type, 0), self.blocked.get(job_type, 0)
        return blocked / arrivals if arrivals else 0.0


@dataclass
class FlowCounters:
    """Whole-run counters per job type, warmup included."""

    arrivals: dict[int, int]
    completions: dict[int, int]
    blocked: dict[int, int]
    in_system: dict[int, int]


@dataclass
class ReplicationMetrics:
    """
    Result of one replication over the observation window (warmup, horizon].
    Throughput L is the time-average delivered service rate, power E the time-average power draw.
    """

    seed: tuple[int, ...]
    warmup: float
    horizon: float
    work: float
    energy: float
    completed_size: float
    completions: dict[int, int]
    arrivals: dict[int, int]
    blocked: dict[int, int]
    busy_time: list[float]
    idle_time: list[float]
    # per group id: time-average fraction of the group's servers holding n jobs, n = 0..B
    occupancy_profile: dict[int, list[float]]
    flow: FlowCounters
    events: int
    buckets: list[BucketStats] = field(default_factory=list)

    @property
    def window(self) -> float:
        return self.horizon - self.warmup

    @property
    def throughput(self) -> float:
        return self.work / self.window

    @property
    def power(self) -> float:
        return self.energy / self.window

    @property
    def energy_efficiency(self) -> float:
        return self.work / self.energy if self.energy > 0 else 0.0

    @property
    def completion_rate(self) -> float:
        return sum(self.completions.values()) / self.window

    def blocking_probability(self, job_type: int | None = None) -> float:
        """Blocked share of the window's arrivals, 0.0 if there were none."""
        if job_type is None:
            arrivals, blocked = sum(self.arrivals.values()), sum(self.blocked.values())
        else:
            arrivals, blocked = self.arrivals.get(job_type, 0), self.blocked.get(job_type, 0)
        return blocked / arrivals if arrivals else 0.0

    def statistics(self) -> dict[str, float]:
        result = {
            "L": self.throughput,
            "E": self.power,
            "EE": self.energy_efficiency,
            "completion_rate": self.completion_rate,
            "blocking": self.blocking_probability(),
        }
        for j in sorted(self.arrivals):
            result[f"blocking_{j}"] = self.blocking_probability(j)
        return result


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float
    n: int

    @classmethod
    def from_samples(cls, values: Sequence[float] | np.ndarray, confidence: float = 0.95) -> "Estimate":
        """Sample mean with Student-t confidence half-width."""
        data = np.asarray(values, dtype=float)
        n = len(data)
        if n == 0:
            return cls(math.nan, math.nan, 0)
        mean = float(np.mean(data))
        if n == 1:
            return cls(mean, math.inf, 1)
        sem = float(stats.sem(data))
        half_width = float(stats.t.ppf((1 + confidence) / 2, n - 1)) * sem if sem > 0 else 0.0
        return cls(mean, half_width, n)

    @property
    def relative_half_width(self) -> float:
        if self.mean == 0:
            return 0.0 if self.half_width == 0 else math.inf
        return self.half_width / abs(self.mean)

    def meets(self, target_relative: float) -> bool:
        return self.relative_half_width <= target_relative


@dataclass
class AggregateMetrics:
    estimates: dict[str, Estimate]
    replications: list[ReplicationMetrics]
    converged: bool
    target_rel_halfwidth: float

    @classmethod
    def aggregate(cls, runs: Sequence[ReplicationMetrics], confidence: float = 0.95,
                  target_rel_halfwidth: float = 0.03,
                  required: Iterable[str] = CONVERGENCE_STATISTICS) -> "AggregateMetrics":
        per_run = [r.statistics() for r in runs]
        names = sorted({name for s in per_run for name in s})
        estimates = {name: Estimate.from_samples([s[name] for s in per_run if name in s], confidence) for name in names}
        converged = len(runs) >= 2 and all(estimates[name].meets(target_rel_halfwidth) for name in required if name in estimates)
        return cls(estimates, list(runs), converged, target_rel_halfwidth)

    def __getitem__(self, name: str) -> Estimate:
        return self.estimates[name]

    @property
    def L(self) -> Estimate:
        return self.estimates["L"]

    @property
    def E(self) -> Estimate:
        return self.estimates["E"]

    @property
    def EE(self) -> Estimate:
        return self.estimates["EE"]

    @property
    def n_reps(self) -> int:
        return len(self.replications)

    def occupancy_profile(self) -> dict[int, list[float]]:
        """Mean time-average occupancy profile over all replications."""
        groups = self.replications[0].occupancy_profile.keys() if self.replications else []
        return {
            k: np.mean([r.occupancy_profile[k] for r in self.replications], axis=0).tolist()
            for k in groups
        }

    def bucket_estimates(self, confidence: float = 0.95) -> list[dict[str, Estimate]]:
        """Per bucket estimates of throughput, power, energy efficiency and blocking across replications."""
        if not self.replications or not self.replications[0].buckets:
            return []
        result = []
        type_ids = sorted(self.replications[0].arrivals)
        for i in range(len(self.replications[0].buckets)):
            buckets = [r.buckets[i] for r in self.replications]
            row = {
                "L": Estimate.from_samples([b.throughput for b in buckets], confidence),
                "E": Estimate.from_samples([b.power for b in buckets], confidence),
                "EE": Estimate.from_samples([b.energy_efficiency for b in buckets], confidence),
                "blocking": Estimate.from_samples([b.blocking_probability() for b in buckets], confidence),
                "arrivals": Estimate.from_samples([sum(b.arrivals.values()) for b in buckets], confidence),
            }
            for j in type_ids:
                row[f"blocking_{j}"] = Estimate.from_samples([b.blocking_probability(j) for b in buckets], confidence)
            result.append(row)
        return result
