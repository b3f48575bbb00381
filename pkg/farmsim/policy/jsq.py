"""JSQ baseline: the non-full available server with the fewest jobs, smallest id on ties."""

from typing_extensions import override

from farmsim.exceptions import InvariantViolation
from farmsim.model import Scenario
from farmsim.policy.algorithm import AssignmentPolicy
from farmsim.policy.state import PolicyState, shortest_queue_key


def jsq_init(scenario: Scenario) -> PolicyState:
    state = PolicyState(scenario, shortest_queue_key)
    state.populate()
    return state


def jsq_assign(state: PolicyState, job_type: int) -> int | None:
    server = state.heaps[job_type].peek()
    if server is not None and state.is_full(server):
        raise InvariantViolation(f"heap of job type {job_type} contains full server {server}")
    return server


class JsqPolicy(AssignmentPolicy):
    name = "jsq"

    @override
    def init_state(self, scenario: Scenario) -> PolicyState:
        return jsq_init(scenario)

    @override
    def assign(self, job_type: int) -> int | None:
        return jsq_assign(self.state, job_type)

    @override
    def became_full(self, server: int) -> None:
        state = self.state
        for j in state.types_of_server[server]:
            state.heaps[j].remove(server)
            state.refresh_indication(j)

    @override
    def became_unfull(self, server: int) -> None:
        state = self.state
        key = state.key(server)
        for j in state.types_of_server[server]:
            state.heaps[j].push(server, key)
            state.refresh_indication(j)

    @override
    def occupancy_changed(self, server: int) -> None:
        self.state.rekey(server)
