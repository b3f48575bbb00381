from farmsim.exceptions import ConfigurationError
from farmsim.model import Scenario
from farmsim.policy.algorithm import AssignmentPolicy
from farmsim.utils.import_factory import ImportFactory
from farmsim_commons.config import ensure_config_loaded


class PolicyFactory(ImportFactory[AssignmentPolicy]):
    base_class = AssignmentPolicy

    @classmethod
    def build(cls, name: str, scenario: Scenario) -> AssignmentPolicy:
        policies = ensure_config_loaded().POLICIES
        if name not in policies:
            raise ConfigurationError(f'Unknown policy "{name}", configured: {", ".join(sorted(policies))}')
        return cls.get_class(policies[name])(scenario)
