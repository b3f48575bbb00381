"""
This module loads the configuration file and exposes it with a nicer interface.
The configuration file is a yaml/json file, to get the format see config.sample.yaml in the repository root.
Without a configuration file, the built-in defaults are used.

The file is looked up in this order, the first match is loaded:
- $FARMSIM_CONFIG
- $FARMSIM_CONFIG_DIR/config_test.yaml
- $FARMSIM_CONFIG_DIR/config_test.json
- $FARMSIM_CONFIG_DIR/config.yaml
- $FARMSIM_CONFIG_DIR/config.json
- <repo-root>/config_test.yaml
- <repo-root>/config_test.json
- <repo-root>/config.yaml
- <repo-root>/config.json

Environment variables (also from a .env file) have precedence over file entries:
FARMSIM_THREADS, FARMSIM_OUTPUT_DIR, FARMSIM_HORIZON, FARMSIM_REPS.
"""

import json
import os
from dataclasses import dataclass, field, fields
from os import environ
from pathlib import Path
from typing import Any, Self

import yaml
from dotenv import load_dotenv


def clean_comments(d: dict) -> None:
    """Keys starting with "__" are comments, in config files as well as scenario files."""
    for k, v in list(d.items()):
        if isinstance(k, str) and k.startswith("__"):
            del d[k]
        elif isinstance(v, dict):
            clean_comments(v)
        elif isinstance(v, list):
            for item in v:
                if isinstance(item, dict):
                    clean_comments(item)


@dataclass
class ConfigSection:
    @classmethod
    def from_dict(cls, d: dict) -> Self:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"Unknown keys in {cls.__name__}: {', '.join(sorted(unknown))}")
        d = dict(d)
        for f in fields(cls):
            if f.name in d and isinstance(f.type, type) and issubclass(f.type, ConfigSection):
                d[f.name] = f.type.from_dict(d[f.name])
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        d = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, ConfigSection):
                d[f.name] = value.to_dict()
            elif isinstance(value, dict):
                d[f.name] = dict(value)
            else:
                d[f.name] = value
        return d


@dataclass
class SimulationConfig(ConfigSection):
    horizon: float = 2000.0
    # warmup as fraction of the horizon, used when no absolute warmup is given
    warmup_fraction: float = 0.1
    reps: int = 5
    max_reps: int = 40
    target_rel_halfwidth: float = 0.03
    confidence: float = 0.95


@dataclass
class FluidConfig(ConfigSection):
    tol: float = 1e-9
    max_time: float = 1e5
    saturation_tol: float | None = None
    # "resolve" (group by group in priority order) or "integrate" (dynamics from the empty farm)
    method: str = "resolve"
    # vector field evaluations an integration may spend
    max_evaluations: int = 200_000

    @property
    def saturation_threshold(self) -> float:
        return self.saturation_tol if self.saturation_tol is not None else self.tol


@dataclass
class OutputConfig(ConfigSection):
    output_dir: str = "results"
    gnuplot: bool = True


def _default_policies() -> dict[str, str]:
    return {"pas": "pas:PasPolicy", "jsq": "jsq:JsqPolicy"}


@dataclass
class Config:
    basedir: Path
    CONFIG: dict[str, Any]
    CONFIG_FILE: Path | None

    FIXTURES_PATH: Path
    THREADS: int
    SIMULATION: SimulationConfig
    FLUID: FluidConfig
    OUTPUT: OutputConfig
    # policy name => "module:Class", resolved by farmsim.policy.factory
    POLICIES: dict[str, str] = field(default_factory=_default_policies)

    def interpolate_env(self) -> Self:
        """
        Environment variables have precedence over config.yaml entries.
        """
        if "FARMSIM_THREADS" in environ:
            self.THREADS = int(environ["FARMSIM_THREADS"])
        if "FARMSIM_OUTPUT_DIR" in environ:
            self.OUTPUT.output_dir = environ["FARMSIM_OUTPUT_DIR"]
        if "FARMSIM_HORIZON" in environ:
            self.SIMULATION.horizon = float(environ["FARMSIM_HORIZON"])
        if "FARMSIM_REPS" in environ:
            self.SIMULATION.reps = int(environ["FARMSIM_REPS"])
        if "FARMSIM_FIXTURES" in environ:
            self.FIXTURES_PATH = Path(environ["FARMSIM_FIXTURES"])
        return self

    @classmethod
    def candidate_files(cls) -> list[Path]:
        if "FARMSIM_CONFIG_DIR" in environ:
            basedir = Path(environ["FARMSIM_CONFIG_DIR"]).absolute()
        else:
            basedir = Path(__file__).absolute().parent.parent
        candidates = [
            basedir / "config_test.yaml",
            basedir / "config_test.json",
            basedir / "config.yaml",
            basedir / "config.json",
        ]
        if "FARMSIM_CONFIG" in environ:
            candidates = [Path(environ["FARMSIM_CONFIG"])] + candidates
        return candidates

    @classmethod
    def load_default(cls) -> "Config":
        load_dotenv()
        if "FARMSIM_CONFIG" in environ and not Path(environ["FARMSIM_CONFIG"]).exists():
            raise ValueError(f"{environ['FARMSIM_CONFIG']} does not exist")
        for configfile in cls.candidate_files():
            if configfile.exists():
                return cls.load_from_file(configfile)
        return cls.defaults()

    @classmethod
    def defaults(cls, interpolate_env: bool = True) -> "Config":
        basedir = Path(__file__).absolute().parent.parent
        return cls.from_dict(basedir / "config.yaml", {}, interpolate_env=interpolate_env, from_file=False)

    @classmethod
    def load_from_file(cls, filename: Path, interpolate_env: bool = True) -> Self:
        with filename.open() as f:
            if filename.suffix == ".json":
                return cls.from_dict(filename, json.load(f), interpolate_env=interpolate_env)
            return cls.from_dict(filename, yaml.safe_load(f) or {}, interpolate_env=interpolate_env)

    @classmethod
    def from_dict(cls, filename: Path, initial_config: dict, interpolate_env: bool = True, from_file: bool = True) -> Self:
        cls._clean_comments(initial_config)

        basedir: Path = filename.absolute().parent
        fixtures_path = Path(initial_config.get("fixtures_path", basedir / "fixtures"))
        if not fixtures_path.is_absolute():
            fixtures_path = basedir / fixtures_path
        threads = int(initial_config.get("threads", os.cpu_count() or 1))
        policies = _default_policies() | dict(initial_config.get("policies", {}))

        result = cls(
            basedir=basedir,
            CONFIG=initial_config,
            CONFIG_FILE=filename if from_file else None,
            FIXTURES_PATH=fixtures_path,
            THREADS=threads,
            SIMULATION=SimulationConfig.from_dict(initial_config.get("simulation", {})),
            FLUID=FluidConfig.from_dict(initial_config.get("fluid", {})),
            OUTPUT=OutputConfig.from_dict(initial_config.get("output", {})),
            POLICIES=policies,
        )
        if interpolate_env:
            result = result.interpolate_env()
        return result

    def to_dict(self) -> dict[str, Any]:
        return self.CONFIG | {
            "fixtures_path": str(self.FIXTURES_PATH),
            "threads": self.THREADS,
            "simulation": self.SIMULATION.to_dict(),
            "fluid": self.FLUID.to_dict(),
            "output": self.OUTPUT.to_dict(),
            "policies": dict(self.POLICIES),
        }

    @classmethod
    def _clean_comments(cls, d: dict) -> None:
        clean_comments(d)

    def validate(self) -> None:
        """Reject settings that cannot produce a meaningful experiment."""
        if self.THREADS < 1:
            raise ValueError("THREADS must be at least 1")
        sim = self.SIMULATION
        if sim.reps < 2:
            raise ValueError("simulation.reps must be at least 2 for a t-interval")
        if sim.max_reps < sim.reps:
            raise ValueError("simulation.max_reps must not be smaller than simulation.reps")
        if not 0 <= sim.warmup_fraction < 1:
            raise ValueError("simulation.warmup_fraction must be in [0, 1)")
        if sim.horizon <= 0:
            raise ValueError("simulation.horizon must be positive")
        if not 0 < sim.confidence < 1:
            raise ValueError("simulation.confidence must be in (0, 1)")
        if self.FLUID.tol <= 0 or self.FLUID.saturation_threshold <= 0:
            raise ValueError("fluid.tol must be positive")
        if self.FLUID.method not in ("resolve", "integrate"):
            raise ValueError(f"fluid.method must be resolve or integrate, got {self.FLUID.method}")
        if self.FLUID.max_evaluations < 1:
            raise ValueError("fluid.max_evaluations must be positive")
        if not self.POLICIES:
            raise ValueError("No assignment policies configured")


class CurrentConfigProxy:
    def __getattr__(self, item: str) -> Any:
        global current_config
        if not current_config:
            raise ValueError("Config not initialized")
        return getattr(current_config, item)

    def __setattr__(self, key: str, value: Any) -> None:
        global current_config
        if not current_config:
            raise ValueError("Config not initialized")
        setattr(current_config, key, value)


config: Config = CurrentConfigProxy()  # type: ignore
current_config: Config = None  # type: ignore


def load_default_config() -> None:
    global current_config
    current_config = Config.load_default()


def load_default_config_file(filename: Path, additional: dict[str, Any] | None = None) -> None:
    global current_config
    with filename.open("rb") as f:
        if f.name.endswith(".json"):
            d: dict[str, Any] = json.load(f)
        else:
            d = yaml.safe_load(f) or {}
    if additional:
        d = d | additional
    current_config = Config.from_dict(filename, d)


def set_current_config(cfg: Config) -> None:
    """Install an already loaded config, e.g. in worker processes."""
    global current_config
    current_config = cfg


def ensure_config_loaded() -> Config:
    """Library entry points call this so they work without an explicit setup step."""
    if current_config is None:
        load_default_config()
    return current_config


def get_by_names(cfg: Any, names: list[str]) -> Any:
    for name in names:
        if isinstance(cfg, dict):
            cfg = cfg.get(name)
        elif isinstance(cfg, (Config, ConfigSection)):
            if name.upper() in cfg.__dict__:
                cfg = getattr(cfg, name.upper())
            elif name.lower() in cfg.__dict__:
                cfg = getattr(cfg, name.lower())
            elif hasattr(cfg, name):
                cfg = getattr(cfg, name)
            else:
                raise KeyError(name)
        else:
            raise ValueError(f"Invalid config type: {type(cfg)} {cfg}")
        if callable(cfg):
            cfg = cfg()
    return cfg


if __name__ == "__main__":
    import sys

    # print a config option (can be used in bash scripts etc)
    if len(sys.argv) >= 2 and sys.argv[1] == "get":
        load_default_config()
        x = get_by_names(current_config, sys.argv[2:])
        print(str(x))
        sys.exit(0)
    else:
        print("Invalid command")
        sys.exit(1)
