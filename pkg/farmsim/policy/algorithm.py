from abc import ABC, abstractmethod
from typing import ClassVar

from farmsim.exceptions import InvariantViolation
from farmsim.model import Scenario
from farmsim.policy.state import PolicyState


class AssignmentPolicy(ABC):
    """
    Decides for every arriving job which server receives it, or None if the job is blocked.
    The engine reports every occupancy change back through on_arrival / on_departure.
    Policies only see server fullness and occupancies, never arrival rates.
    """

    name: ClassVar[str]

    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario
        self.state = self.init_state(scenario)

    @abstractmethod
    def init_state(self, scenario: Scenario) -> PolicyState:
        raise NotImplementedError()

    @abstractmethod
    def assign(self, job_type: int) -> int | None:
        raise NotImplementedError()

    @abstractmethod
    def became_full(self, server: int) -> None:
        raise NotImplementedError()

    @abstractmethod
    def became_unfull(self, server: int) -> None:
        raise NotImplementedError()

    def occupancy_changed(self, server: int) -> None:
        """Called when a server stays non-full but its occupancy changed. No-op unless keys depend on occupancy."""

    @property
    def occupancy(self) -> list[int]:
        return self.state.occupancy

    def on_arrival(self, server: int) -> None:
        state = self.state
        if state.occupancy[server] >= state.capacity[server]:
            raise InvariantViolation(f"job assigned to full server {server}")
        state.occupancy[server] += 1
        if state.occupancy[server] == state.capacity[server]:
            self.became_full(server)
        else:
            self.occupancy_changed(server)

    def on_departure(self, server: int) -> None:
        state = self.state
        if state.occupancy[server] <= 0:
            raise InvariantViolation(f"departure from empty server {server}")
        was_full = state.occupancy[server] == state.capacity[server]
        state.occupancy[server] -= 1
        if was_full:
            self.became_unfull(server)
        else:
            self.occupancy_changed(server)
