"""
PAS: every job goes to a non-full available server with maximal effective energy efficiency mu_k / (eps_k - eps_k^0).

Heaps are only touched when a server becomes full (it leaves all heaps of its job types)
or stops being full (it re-enters them). Under SQTB the occupancy is part of the key,
so every occupancy change of a non-full server re-keys it as well.
"""

from typing_extensions import override

from farmsim.exceptions import InvariantViolation
from farmsim.model import Scenario, TieBreak
from farmsim.policy.algorithm import AssignmentPolicy
from farmsim.policy.state import PolicyState, efficiency_key


def pas_init(scenario: Scenario) -> PolicyState:
    state = PolicyState(scenario, efficiency_key(scenario.tie_break))
    state.populate()
    return state


def pas_assign(state: PolicyState, job_type: int) -> int | None:
    server = state.indication[job_type]
    if server is not None and state.is_full(server):
        raise InvariantViolation(f"indication vector of job type {job_type} points to full server {server}")
    return server


def updating_upon_arrival(state: PolicyState, server: int) -> None:
    """server just became full: drop it from every heap it belongs to."""
    for j in state.types_of_server[server]:
        state.heaps[j].remove(server)
        state.refresh_indication(j)


def updating_upon_departure(state: PolicyState, server: int) -> None:
    """server just left the full state: it re-enters every heap it belongs to."""
    key = state.key(server)
    for j in state.types_of_server[server]:
        state.heaps[j].push(server, key)
        state.refresh_indication(j)


class PasPolicy(AssignmentPolicy):
    name = "pas"

    @override
    def init_state(self, scenario: Scenario) -> PolicyState:
        self._rekey = scenario.tie_break == TieBreak.SQTB
        return pas_init(scenario)

    @override
    def assign(self, job_type: int) -> int | None:
        return pas_assign(self.state, job_type)

    @override
    def became_full(self, server: int) -> None:
        updating_upon_arrival(self.state, server)

    @override
    def became_unfull(self, server: int) -> None:
        updating_upon_departure(self.state, server)

    @override
    def occupancy_changed(self, server: int) -> None:
        if self._rekey:
            self.state.rekey(server)
