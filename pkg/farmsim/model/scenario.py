"""
Domain types of a server farm: server groups, job types, job size distributions and the scenario tying them together.

A scenario stores base quantities (scaling parameter h = 1) together with h.
Scaled server counts R_k = R_k^0 * h and arrival rates lambda_j = lambda_j^0 * h are derived on access.
Servers are enumerated group by group (ascending group id), starting at server id 0.
"""

import math
from dataclasses import dataclass, field, replace
from enum import StrEnum
from functools import cached_property
from typing import Iterable

from farmsim.exceptions import InvalidScenario

PARETO_FINITE_SHAPE = 2.001
PARETO_INFINITE_SHAPE = 1.98


class SizeKind(StrEnum):
    EXPONENTIAL = "exponential"
    PARETO_FINITE = "pareto-finite"
    PARETO_INFINITE = "pareto-infinite"
    DETERMINISTIC = "deterministic"


class Discipline(StrEnum):
    PS = "ps"
    SRPT = "srpt"


class TieBreak(StrEnum):
    LLTB = "lltb"
    SQTB = "sqtb"


@dataclass(frozen=True)
class SizeDistribution:
    """Job size distribution with unit mean."""

    kind: SizeKind = SizeKind.EXPONENTIAL
    shape: float | None = None

    def __post_init__(self) -> None:
        if self.kind in (SizeKind.PARETO_FINITE, SizeKind.PARETO_INFINITE):
            if self.shape is None:
                default = PARETO_FINITE_SHAPE if self.kind == SizeKind.PARETO_FINITE else PARETO_INFINITE_SHAPE
                object.__setattr__(self, "shape", default)
            assert self.shape is not None
            if not self.shape > 1:
                raise InvalidScenario(f"Pareto shape {self.shape} has no finite mean (shape must be > 1)")
        elif self.shape is not None:
            raise InvalidScenario(f"Size distribution {self.kind} takes no shape parameter")

    @property
    def is_exponential(self) -> bool:
        return self.kind == SizeKind.EXPONENTIAL

    @property
    def pareto_scale(self) -> float:
        """Scale x_m of a unit-mean Pareto distribution: (a - 1) / a."""
        if self.shape is None:
            raise InvalidScenario(f"{self.kind} is not a Pareto distribution")
        return (self.shape - 1) / self.shape

    @classmethod
    def exponential(cls) -> "SizeDistribution":
        return cls(SizeKind.EXPONENTIAL)

    @classmethod
    def pareto_finite(cls, shape: float = PARETO_FINITE_SHAPE) -> "SizeDistribution":
        return cls(SizeKind.PARETO_FINITE, shape)

    @classmethod
    def pareto_infinite(cls, shape: float = PARETO_INFINITE_SHAPE) -> "SizeDistribution":
        return cls(SizeKind.PARETO_INFINITE, shape)

    @classmethod
    def deterministic(cls) -> "SizeDistribution":
        return cls(SizeKind.DETERMINISTIC)


@dataclass(frozen=True)
class ServerGroup:
    id: int
    mu: float
    eps_busy: float
    eps_idle: float
    buffer: int
    base_count: int = 1

    def __post_init__(self) -> None:
        if self.id < 1:
            raise InvalidScenario(f"Server group id must be >= 1, got {self.id}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise InvalidScenario(f"Server group {self.id}: service rate must be positive, got {self.mu}")
        if not self.eps_idle >= 0:
            raise InvalidScenario(f"Server group {self.id}: idle power must be non-negative, got {self.eps_idle}")
        if not self.eps_busy > self.eps_idle:
            raise InvalidScenario(f"Server group {self.id}: busy power {self.eps_busy} must exceed idle power {self.eps_idle}")
        if self.buffer < 1:
            raise InvalidScenario(f"Server group {self.id}: buffer must be >= 1, got {self.buffer}")
        if self.base_count < 1:
            raise InvalidScenario(f"Server group {self.id}: base count must be >= 1, got {self.base_count}")

    @property
    def effective_ee(self) -> float:
        return effective_energy_efficiency(self)


@dataclass(frozen=True)
class JobType:
    id: int
    base_rate: float
    available_groups: frozenset[int]
    size_dist: SizeDistribution = field(default_factory=SizeDistribution)

    def __post_init__(self) -> None:
        if self.id < 1:
            raise InvalidScenario(f"Job type id must be >= 1, got {self.id}")
        if not (self.base_rate >= 0 and math.isfinite(self.base_rate)):
            raise InvalidScenario(f"Job type {self.id}: arrival rate must be non-negative, got {self.base_rate}")
        if not self.available_groups:
            raise InvalidScenario(f"Job type {self.id}: no available server groups")
        if not isinstance(self.available_groups, frozenset):
            object.__setattr__(self, "available_groups", frozenset(self.available_groups))


@dataclass(frozen=True)
class Scenario:
    groups: tuple[ServerGroup, ...]
    job_types: tuple[JobType, ...]
    h: int = 1
    discipline: Discipline = Discipline.PS
    tie_break: TieBreak = TieBreak.LLTB
    name: str = "scenario"
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(sorted(self.groups, key=lambda g: g.id)))
        object.__setattr__(self, "job_types", tuple(sorted(self.job_types, key=lambda j: j.id)))
        if not self.groups:
            raise InvalidScenario("Scenario has no server groups")
        if not self.job_types:
            raise InvalidScenario("Scenario has no job types")
        group_ids = [g.id for g in self.groups]
        if len(set(group_ids)) != len(group_ids):
            raise InvalidScenario(f"Duplicate server group ids: {group_ids}")
        type_ids = [j.id for j in self.job_types]
        if len(set(type_ids)) != len(type_ids):
            raise InvalidScenario(f"Duplicate job type ids: {type_ids}")
        for j in self.job_types:
            unknown = j.available_groups - set(group_ids)
            if unknown:
                raise InvalidScenario(f"Job type {j.id} references unknown server groups {sorted(unknown)}")
        if isinstance(self.h, bool) or not isinstance(self.h, int) or self.h < 1:
            raise InvalidScenario(f"Scaling parameter h must be an integer >= 1, got {self.h!r}")
        object.__setattr__(self, "discipline", Discipline(self.discipline))
        object.__setattr__(self, "tie_break", TieBreak(self.tie_break))

    # --- scaled quantities ---

    def server_count(self, group_id: int) -> int:
        return self.group(group_id).base_count * self.h

    def arrival_rate(self, type_id: int) -> float:
        return self.job_type(type_id).base_rate * self.h

    @property
    def total_servers(self) -> int:
        return sum(g.base_count for g in self.groups) * self.h

    @property
    def zero_group_count(self) -> int:
        """Scaled size of the virtual blocking group (one server at base scale)."""
        return self.h

    @property
    def s0(self) -> int:
        """(|S| + R_0) / h, an integer by construction."""
        return sum(g.base_count for g in self.groups) + 1

    @property
    def is_exponential(self) -> bool:
        return all(j.size_dist.is_exponential for j in self.job_types)

    # --- lookups ---

    @cached_property
    def _groups_by_id(self) -> dict[int, ServerGroup]:
        return {g.id: g for g in self.groups}

    @cached_property
    def _types_by_id(self) -> dict[int, JobType]:
        return {j.id: j for j in self.job_types}

    def group(self, group_id: int) -> ServerGroup:
        try:
            return self._groups_by_id[group_id]
        except KeyError:
            raise InvalidScenario(f"Unknown server group {group_id}") from None

    def job_type(self, type_id: int) -> JobType:
        try:
            return self._types_by_id[type_id]
        except KeyError:
            raise InvalidScenario(f"Unknown job type {type_id}") from None

    @property
    def group_ids(self) -> list[int]:
        return [g.id for g in self.groups]

    @property
    def type_ids(self) -> list[int]:
        return [j.id for j in self.job_types]

    @cached_property
    def server_groups(self) -> tuple[ServerGroup, ...]:
        """Group of every server, indexed by server id."""
        result: list[ServerGroup] = []
        for g in self.groups:
            result.extend([g] * (g.base_count * self.h))
        return tuple(result)

    @cached_property
    def group_server_ranges(self) -> dict[int, range]:
        ranges = {}
        start = 0
        for g in self.groups:
            count = g.base_count * self.h
            ranges[g.id] = range(start, start + count)
            start += count
        return ranges

    def servers_of_type(self, type_id: int) -> list[int]:
        """S_j: all servers of the groups available to job type j, ascending."""
        available = self.job_type(type_id).available_groups
        return [s for g in self.groups if g.id in available for s in self.group_server_ranges[g.id]]

    def types_of_group(self, group_id: int) -> list[int]:
        return [j.id for j in self.job_types if group_id in j.available_groups]

    def with_base(self) -> "Scenario":
        """Fold h into the base quantities (h becomes 1)."""
        if self.h == 1:
            return self
        return replace(
            self,
            groups=tuple(replace(g, base_count=g.base_count * self.h) for g in self.groups),
            job_types=tuple(replace(j, base_rate=j.base_rate * self.h) for j in self.job_types),
            h=1,
        )


def effective_energy_efficiency(group: ServerGroup) -> float:
    """mu_k / (eps_k - eps_k^0): service rate per unit of controllable power."""
    return group.mu / (group.eps_busy - group.eps_idle)


def total_service_rate(scenario: Scenario, groups: Iterable[int] | None = None) -> float:
    selected = set(scenario.group_ids if groups is None else groups)
    return sum(scenario.server_count(g.id) * g.mu for g in scenario.groups if g.id in selected)


def normalized_offered_traffic(scenario: Scenario) -> float:
    capacity = total_service_rate(scenario)
    if capacity <= 0:
        raise InvalidScenario("Scenario has zero total service rate")
    return sum(scenario.arrival_rate(j.id) for j in scenario.job_types) / capacity


def per_type_traffic(scenario: Scenario, type_id: int) -> float:
    capacity = total_service_rate(scenario, scenario.job_type(type_id).available_groups)
    if capacity <= 0:
        raise InvalidScenario(f"Job type {type_id} has zero available service rate")
    return scenario.arrival_rate(type_id) / capacity


def scale(scenario: Scenario, h: int) -> Scenario:
    """Multiply server counts and arrival rates by h."""
    if isinstance(h, bool) or not isinstance(h, int) or h < 1:
        raise InvalidScenario(f"Scaling parameter h must be an integer >= 1, got {h!r}")
    return replace(scenario, h=scenario.h * h)


def at_scale(scenario: Scenario, h: int) -> Scenario:
    """The scenario's base quantities scaled by exactly h, regardless of the current scale."""
    return scale(replace(scenario, h=1), h)


def with_buffer(scenario: Scenario, buffer: int) -> Scenario:
    return replace(scenario, groups=tuple(replace(g, buffer=buffer) for g in scenario.groups))


def with_policy_options(scenario: Scenario, discipline: Discipline | str | None = None,
                        tie_break: TieBreak | str | None = None) -> Scenario:
    return replace(
        scenario,
        discipline=Discipline(discipline) if discipline is not None else scenario.discipline,
        tie_break=TieBreak(tie_break) if tie_break is not None else scenario.tie_break,
    )


DISTRIBUTION_CHOICES = ("exp", "pareto-f", "pareto-inf", "mixed", "det")
_MIXED_CYCLE = (SizeDistribution.exponential(), SizeDistribution.pareto_finite(), SizeDistribution.pareto_infinite())


def size_distribution_for(name: str, position: int = 0) -> SizeDistribution:
    """Distribution for a command line name; "mixed" cycles exp / Pareto-F / Pareto-INF over job type positions."""
    match name:
        case "exp":
            return SizeDistribution.exponential()
        case "pareto-f":
            return SizeDistribution.pareto_finite()
        case "pareto-inf":
            return SizeDistribution.pareto_infinite()
        case "det":
            return SizeDistribution.deterministic()
        case "mixed":
            return _MIXED_CYCLE[position % len(_MIXED_CYCLE)]
    raise InvalidScenario(f'Unknown size distribution "{name}", choose from {", ".join(DISTRIBUTION_CHOICES)}')


def with_size_distribution(scenario: Scenario, name: str) -> Scenario:
    return replace(
        scenario,
        job_types=tuple(replace(j, size_dist=size_distribution_for(name, i)) for i, j in enumerate(scenario.job_types)),
    )
