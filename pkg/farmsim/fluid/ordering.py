"""
Ordered (group, occupancy) states and occupancy proportions over them.

Controllable states (occupancy below the buffer) come first, by descending index (equivalently descending
effective energy efficiency for a positive e*), ties by group id then occupancy. The single state of the
virtual blocking group 0 follows, then the full states by group id.
Proportions z are normalised by S_0 = sum_k R_k^0 + 1, so group k holds mass R_k^0 / S_0 and group 0 holds 1 / S_0.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from farmsim.fluid.indices import whittle_index
from farmsim.model import Scenario, effective_energy_efficiency

VIRTUAL_GROUP = 0


class OrderedState(NamedTuple):
    group: int
    occupancy: int
    controllable: bool


@dataclass(frozen=True)
class StateOrdering:
    states: tuple[OrderedState, ...]
    # groups by descending priority
    group_priority: tuple[int, ...]

    @classmethod
    def for_scenario(cls, scenario: Scenario, e_star: float | None = None) -> "StateOrdering":
        def priority(group_id: int) -> float:
            g = scenario.group(group_id)
            return whittle_index(g, e_star) if e_star is not None else effective_energy_efficiency(g)

        group_priority = tuple(sorted(scenario.group_ids, key=lambda k: (-priority(k), k)))
        controllable = sorted(
            (OrderedState(g.id, n, True) for g in scenario.groups for n in range(g.buffer)),
            key=lambda s: (-priority(s.group), s.group, s.occupancy),
        )
        full = [OrderedState(g.id, g.buffer, False) for g in scenario.groups]
        return cls(tuple(controllable) + (OrderedState(VIRTUAL_GROUP, 0, True),) + tuple(full), group_priority)

    def __len__(self) -> int:
        return len(self.states)

    @cached_property
    def _positions(self) -> dict[tuple[int, int], int]:
        return {(s.group, s.occupancy): i for i, s in enumerate(self.states)}

    def index(self, group: int, occupancy: int) -> int:
        return self._positions[(group, occupancy)]


@dataclass(frozen=True, eq=False)
class OccupancyVector:
    ordering: StateOrdering
    z: np.ndarray
    s0: int

    @classmethod
    def from_group_fractions(cls, scenario: Scenario, fractions: Mapping[int, Sequence[float]],
                             ordering: StateOrdering | None = None) -> "OccupancyVector":
        """Build z from per-group occupancy fractions y_{k,n} (each group's fractions sum to 1)."""
        ordering = ordering or StateOrdering.for_scenario(scenario)
        s0 = scenario.s0
        z = np.zeros(len(ordering))
        z[ordering.index(VIRTUAL_GROUP, 0)] = 1.0 / s0
        for g in scenario.groups:
            for n, y in enumerate(fractions[g.id]):
                z[ordering.index(g.id, n)] = g.base_count * y / s0
        return cls(ordering, z, s0)

    def group_mass(self, group: int) -> float:
        return float(sum(self.z[i] for i, s in enumerate(self.ordering.states) if s.group == group))

    def group_fractions(self, scenario: Scenario, group: int) -> np.ndarray:
        g = scenario.group(group)
        y = np.array([self.z[self.ordering.index(group, n)] for n in range(g.buffer + 1)])
        return y * self.s0 / g.base_count

    def busy_fraction(self, scenario: Scenario, group: int) -> float:
        return float(1.0 - self.group_fractions(scenario, group)[0])

    def distance(self, other: "OccupancyVector") -> float:
        """Sup-norm distance, matched by (group, occupancy)."""
        return max(abs(self.z[i] - other.z[other.ordering.index(s.group, s.occupancy)]) for i, s in enumerate(self.ordering.states))

    def as_dict(self) -> dict[str, float]:
        return {f"z_{s.group}_{s.occupancy}": float(v) for s, v in zip(self.ordering.states, self.z)}
