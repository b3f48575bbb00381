"""
Random scenario generation.

Service rates are drawn uniformly from [1, 10]. Group 1 has energy efficiency mu/eps = 1, every further group
is less efficient by a factor drawn uniformly from [0.5, 1]. The idle power of group k is eps_k * (0.1 + 0.1k),
clamped at 0.9 * eps_k so that idle power always stays below busy power.
"""

import logging
from enum import StrEnum

import numpy as np

from farmsim.exceptions import InvalidScenario
from farmsim.model.scenario import Discipline, JobType, Scenario, ServerGroup, TieBreak

logger = logging.getLogger(__name__)

MU_RANGE = (1.0, 10.0)
EFFICIENCY_RATIO_RANGE = (0.5, 1.0)
MAX_IDLE_FRACTION = 0.9


class GeneratorMode(StrEnum):
    SINGLE_TYPE = "single_type"
    MULTI_TYPE = "multi_type"


def idle_fraction(group_index: int) -> float:
    return min(0.1 + 0.1 * group_index, MAX_IDLE_FRACTION)


def generate_groups(rng: np.random.Generator, K: int, buffer: int, base_count: int = 1) -> list[ServerGroup]:
    mus = rng.uniform(*MU_RANGE, size=K)
    ratios = rng.uniform(*EFFICIENCY_RATIO_RANGE, size=K - 1)
    efficiency = np.concatenate(([1.0], np.cumprod(ratios)))
    groups = []
    for k in range(1, K + 1):
        mu = float(mus[k - 1])
        eps_busy = mu / float(efficiency[k - 1])
        groups.append(ServerGroup(
            id=k,
            mu=mu,
            eps_busy=eps_busy,
            eps_idle=eps_busy * idle_fraction(k),
            buffer=buffer,
            base_count=base_count,
        ))
    return groups


def generate_scenario(seed: int, K: int, J: int, rho: float, mode: GeneratorMode | str,
                      buffer: int = 2, base_count: int = 1,
                      discipline: Discipline = Discipline.PS, tie_break: TieBreak = TieBreak.LLTB) -> Scenario:
    """
    Draw a random scenario, deterministic in seed.
    single_type: one job type that may use all groups, lambda = rho * sum_k R_k mu_k.
    multi_type: each type j uses a random subset K_j of m_j ~ U{1..K} groups, lambda_j = rho * sum_{k in K_j} R_k mu_k.
    """
    mode = GeneratorMode(mode)
    if K < 2:
        raise InvalidScenario(f"Need at least two server groups, got K={K}")
    if J < 1:
        raise InvalidScenario(f"Need at least one job type, got J={J}")
    if not rho > 0:
        raise InvalidScenario(f"Offered traffic must be positive, got rho={rho}")
    if mode == GeneratorMode.SINGLE_TYPE and J != 1:
        raise InvalidScenario(f"single_type generation produces exactly one job type, got J={J}")

    rng = np.random.default_rng(seed)
    groups = generate_groups(rng, K, buffer, base_count)
    capacity = {g.id: g.base_count * g.mu for g in groups}

    job_types = []
    if mode == GeneratorMode.SINGLE_TYPE:
        job_types.append(JobType(id=1, base_rate=rho * sum(capacity.values()), available_groups=frozenset(capacity)))
    else:
        for j in range(1, J + 1):
            m = int(rng.integers(1, K + 1))
            available = frozenset(int(k) + 1 for k in rng.choice(K, size=m, replace=False))
            job_types.append(JobType(id=j, base_rate=rho * sum(capacity[k] for k in available), available_groups=available))

    scenario = Scenario(
        groups=tuple(groups),
        job_types=tuple(job_types),
        discipline=discipline,
        tie_break=tie_break,
        name=f"random-{mode}-K{K}-J{J}-seed{seed}",
    )
    logger.debug("Generated %s", scenario.name)
    return scenario
