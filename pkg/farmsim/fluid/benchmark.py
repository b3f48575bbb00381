"""
Asymptotic benchmark: the energy efficiency of the relaxed optimum, evaluated at the fluid equilibrium of PAS.

The benchmark is certified when there is a single job type or the heavy traffic condition holds;
otherwise the value is still reported but flagged. Non-exponential job sizes are treated with their
unit mean and the result is flagged as approximate.
"""

import logging
import math
from dataclasses import dataclass

from farmsim.exceptions import BenchmarkError
from farmsim.fluid.equilibrium import EquilibriumMethod, WithinGroupSplit, solve_fluid
from farmsim.fluid.indices import availability_load, whittle_index
from farmsim.fluid.ordering import OccupancyVector
from farmsim.model import Scenario

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BenchmarkResult:
    z_star: OccupancyVector
    ee_opt: float
    availability: dict[int, float]
    heavy_traffic: bool
    indices: dict[int, float]
    certified: bool
    approximate: bool
    # per unit of h
    throughput: float
    power: float


def opt_energy_efficiency(scenario: Scenario, tol: float | None = None, max_time: float | None = None,
                          split: WithinGroupSplit | str | None = None,
                          method: EquilibriumMethod | str | None = None) -> BenchmarkResult:
    z_star, model, x = solve_fluid(scenario, tol, max_time, split, method)
    fractions = model.group_fractions(x)
    throughput = 0.0
    power = 0.0
    for g in scenario.groups:
        busy = float(fractions[g.id][1:].sum())
        throughput += g.base_count * busy * g.mu
        power += g.base_count * (busy * g.eps_busy + (1.0 - busy) * g.eps_idle)
    ee_opt = throughput / power if power > 0 else 0.0

    availability, heavy_traffic = availability_load(scenario)
    certified = heavy_traffic or len(scenario.job_types) == 1
    if not certified:
        logger.warning("benchmark of %s not certified: multiple job types without heavy traffic (A = %s)",
                       scenario.name, {j: round(a, 4) for j, a in availability.items()})
    return BenchmarkResult(
        z_star=z_star,
        ee_opt=ee_opt,
        availability=availability,
        heavy_traffic=heavy_traffic,
        indices={g.id: whittle_index(g, ee_opt) for g in scenario.groups},
        certified=certified,
        approximate=not scenario.is_exponential,
        throughput=throughput,
        power=power,
    )


def normalized_deviation(ee_opt: float, ee_policy: float) -> float:
    """(EE_OPT - EE_policy) / EE_OPT, reported as-is even when slightly negative."""
    if not ee_opt > 0 or not math.isfinite(ee_opt):
        raise BenchmarkError(f"benchmark energy efficiency must be positive, got {ee_opt}")
    return (ee_opt - ee_policy) / ee_opt
