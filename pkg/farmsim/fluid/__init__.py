from farmsim.fluid.benchmark import BenchmarkResult, normalized_deviation, opt_energy_efficiency
from farmsim.fluid.birth_death import birth_death_steady_state
from farmsim.fluid.equilibrium import EquilibriumMethod, FluidModel, WithinGroupSplit, fluid_equilibrium, solve_fluid
from farmsim.fluid.indices import (
    AvailabilityLoad,
    ThresholdAction,
    availability_load,
    optimal_threshold,
    relaxed_subproblem_value,
    threshold_action,
    whittle_index,
)
from farmsim.fluid.ordering import OccupancyVector, OrderedState, StateOrdering

__all__ = [
    "AvailabilityLoad",
    "BenchmarkResult",
    "EquilibriumMethod",
    "FluidModel",
    "OccupancyVector",
    "OrderedState",
    "StateOrdering",
    "ThresholdAction",
    "WithinGroupSplit",
    "availability_load",
    "birth_death_steady_state",
    "fluid_equilibrium",
    "normalized_deviation",
    "opt_energy_efficiency",
    "optimal_threshold",
    "relaxed_subproblem_value",
    "solve_fluid",
    "threshold_action",
    "whittle_index",
]
