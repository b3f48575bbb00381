import unittest
from pathlib import Path

from farmsim.model import Scenario, load_scenario
from farmsim_commons.config import Config, config, set_current_config

config_basis = {
    "threads": 1,
    "simulation": {
        "horizon": 500.0,
        "warmup_fraction": 0.1,
        "reps": 3,
        "max_reps": 6,
        "target_rel_halfwidth": 0.03,
        "confidence": 0.95,
    },
    "fluid": {
        "tol": 1e-9,
        "max_time": 1e5,
    },
    "output": {
        "output_dir": "/dev/shm/farmsim-test-results",
        "gnuplot": True,
    },
}
repo_root: Path = Path(__file__).absolute().parent.parent.parent
config_file: Path = repo_root / "config.test.yaml"
fixtures_path: Path = repo_root / "fixtures"


def load_fixture(name: str) -> Scenario:
    return load_scenario(fixtures_path / f"{name}.yaml")


class TestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        super().setUpClass()
        set_current_config(Config.from_dict(config_file, dict(config_basis), interpolate_env=False))
        assert config.CONFIG_FILE.name == "config.test.yaml"
