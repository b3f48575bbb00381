"""Index quantities of the per-server relaxed subproblems and the heavy traffic condition."""

from enum import StrEnum
from typing import NamedTuple

import numpy as np

from farmsim.fluid.birth_death import birth_death_steady_state
from farmsim.model import Scenario, ServerGroup


class ThresholdAction(StrEnum):
    ACCEPT = "accept"
    EITHER = "either"
    REJECT = "reject"


class AvailabilityLoad(NamedTuple):
    load: dict[int, float]
    heavy_traffic: bool


def whittle_index(group: ServerGroup, e_star: float) -> float:
    """nu* = 1 - e* (eps_k - eps_k^0) / mu_k."""
    return 1.0 - e_star * (group.eps_busy - group.eps_idle) / group.mu


def relaxed_subproblem_value(group: ServerGroup, m: int, nu: float, e_star: float, arrival_rate: float) -> float:
    """
    Long-run value of a server that accepts jobs in occupancies 0..m and rejects above:
    lambda * ((mu - e*(eps - eps^0)) / mu - nu) * sum_{n<=m} r^n / sum_{n<=m+1} r^n, r = lambda / mu.
    """
    if not 0 <= m < group.buffer:
        raise ValueError(f"threshold {m} outside 0..{group.buffer - 1}")
    r = arrival_rate / group.mu
    powers = r ** np.arange(m + 2)
    prefactor = arrival_rate * ((group.mu - e_star * (group.eps_busy - group.eps_idle)) / group.mu - nu)
    return float(prefactor * powers[:-1].sum() / powers.sum())


def optimal_threshold(group: ServerGroup, nu: float, e_star: float, arrival_rate: float) -> int | None:
    """
    Brute force over thresholds m = 0..B-1 and "reject everything" (value 0, returned as None).
    Ties between thresholds go to the larger one, a threshold must beat rejection strictly.
    """
    best_m: int | None = None
    best_value = 0.0
    for m in range(group.buffer):
        value = relaxed_subproblem_value(group, m, nu, e_star, arrival_rate)
        if value >= best_value and (value > best_value or best_m is not None):
            best_m, best_value = m, value
    return best_m


def threshold_action(group: ServerGroup, nu: float, e_star: float) -> ThresholdAction:
    """Accept in every controllable state below the index, reject above it, either at equality."""
    index = whittle_index(group, e_star)
    if nu < index:
        return ThresholdAction.ACCEPT
    if nu > index:
        return ThresholdAction.REJECT
    return ThresholdAction.EITHER


def availability_load(scenario: Scenario) -> AvailabilityLoad:
    """
    A_j: expected number of non-full servers in S_j when every server accepts every job offered to it,
    each server seeing the full rate of all job types it serves. Evaluated at the scenario's scale,
    for exponential job sizes. Heavy traffic holds if A_j <= 1 for every type.
    """
    nonfull = {}
    for g in scenario.groups:
        rate = sum(scenario.arrival_rate(j) for j in scenario.types_of_group(g.id))
        nonfull[g.id] = 1.0 - float(birth_death_steady_state(rate, g.mu, g.buffer)[-1])
    load = {
        j.id: sum(scenario.server_count(k) * nonfull[k] for k in sorted(j.available_groups))
        for j in scenario.job_types
    }
    return AvailabilityLoad(load, all(a <= 1.0 for a in load.values()))
