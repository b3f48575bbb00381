from farmsim.model.generator import GeneratorMode, generate_scenario
from farmsim.model.scenario import (
    DISTRIBUTION_CHOICES,
    Discipline,
    JobType,
    Scenario,
    ServerGroup,
    SizeDistribution,
    SizeKind,
    TieBreak,
    at_scale,
    effective_energy_efficiency,
    normalized_offered_traffic,
    per_type_traffic,
    scale,
    with_buffer,
    with_policy_options,
    with_size_distribution,
)
from farmsim.model.scenario_file import load_scenario, resolve_fixture, save_scenario, scenario_from_dict

__all__ = [
    "DISTRIBUTION_CHOICES",
    "Discipline",
    "GeneratorMode",
    "JobType",
    "Scenario",
    "ServerGroup",
    "SizeDistribution",
    "SizeKind",
    "TieBreak",
    "at_scale",
    "effective_energy_efficiency",
    "generate_scenario",
    "load_scenario",
    "normalized_offered_traffic",
    "per_type_traffic",
    "resolve_fixture",
    "save_scenario",
    "scale",
    "scenario_from_dict",
    "with_buffer",
    "with_policy_options",
    "with_size_distribution",
]
