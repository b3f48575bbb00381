"""
These classes are used to (de)serialize scenarios from/to yaml or json files.

Files hold base quantities (h = 1); the scaling parameter is supplied at run time.
Keys starting with "__" are comments.
"""

import json
from pathlib import Path
from typing import Annotated, Any, Self

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from farmsim.exceptions import ConfigurationError, InvalidScenario
from farmsim.model.scenario import Discipline, JobType, Scenario, ServerGroup, SizeDistribution, SizeKind, TieBreak
from farmsim_commons.config import clean_comments

PositiveId = Annotated[int, Field(ge=1)]


class SizeDistributionModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: SizeKind = SizeKind.EXPONENTIAL
    shape: float | None = Field(default=None, gt=1)


class ServerGroupModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: PositiveId
    mu: float = Field(gt=0)
    eps_busy: float
    eps_idle: float = Field(ge=0)
    buffer: int = Field(ge=1)
    base_count: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def check_power(self) -> Self:
        if not self.eps_busy > self.eps_idle:
            raise ValueError(f"group {self.id}: eps_busy must exceed eps_idle")
        return self


class JobTypeModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: PositiveId
    base_rate: float = Field(ge=0)
    available_groups: list[PositiveId] = Field(min_length=1)
    size_dist: SizeDistributionModel = Field(default_factory=SizeDistributionModel)


class ScenarioModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    notes: list[str] = Field(default_factory=list)
    discipline: Discipline = Discipline.PS
    tie_break: TieBreak = TieBreak.LLTB
    groups: list[ServerGroupModel] = Field(min_length=1)
    job_types: list[JobTypeModel] = Field(min_length=1)

    def to_scenario(self, h: int = 1) -> Scenario:
        return Scenario(
            groups=tuple(ServerGroup(**g.model_dump()) for g in self.groups),
            job_types=tuple(
                JobType(
                    id=j.id,
                    base_rate=j.base_rate,
                    available_groups=frozenset(j.available_groups),
                    size_dist=SizeDistribution(j.size_dist.kind, j.size_dist.shape),
                )
                for j in self.job_types
            ),
            h=h,
            discipline=self.discipline,
            tie_break=self.tie_break,
            name=self.name,
            notes=tuple(self.notes),
        )

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "ScenarioModel":
        base = scenario.with_base()
        return cls(
            name=base.name,
            notes=list(base.notes),
            discipline=base.discipline,
            tie_break=base.tie_break,
            groups=[
                ServerGroupModel(id=g.id, mu=g.mu, eps_busy=g.eps_busy, eps_idle=g.eps_idle, buffer=g.buffer, base_count=g.base_count)
                for g in base.groups
            ],
            job_types=[
                JobTypeModel(
                    id=j.id,
                    base_rate=j.base_rate,
                    available_groups=sorted(j.available_groups),
                    size_dist=SizeDistributionModel(kind=j.size_dist.kind, shape=j.size_dist.shape),
                )
                for j in base.job_types
            ],
        )


def scenario_from_dict(d: dict[str, Any], h: int = 1) -> Scenario:
    clean_comments(d)
    try:
        return ScenarioModel.model_validate(d).to_scenario(h)
    except ValidationError as e:
        raise InvalidScenario(str(e)) from e


def load_scenario(path: Path, h: int = 1) -> Scenario:
    try:
        with path.open() as f:
            d = json.load(f) if path.suffix == ".json" else yaml.safe_load(f)
    except OSError as e:
        raise ConfigurationError(f"Cannot read scenario file {path}: {e}") from e
    if not isinstance(d, dict):
        raise InvalidScenario(f"{path}: expected a mapping at top level")
    d.setdefault("name", path.stem)
    return scenario_from_dict(d, h)


def save_scenario(scenario: Scenario, path: Path) -> None:
    d = ScenarioModel.from_scenario(scenario).model_dump(mode="json")
    with path.open("w") as f:
        if path.suffix == ".json":
            json.dump(d, f, indent=2)
        else:
            yaml.safe_dump(d, f, sort_keys=False)


def resolve_fixture(name: str, fixtures_path: Path) -> Path:
    """Accept a file path or the name of a file in the fixtures directory (with or without suffix)."""
    candidates = [Path(name), fixtures_path / name, fixtures_path / f"{name}.yaml", fixtures_path / f"{name}.json"]
    for candidate in candidates:
        if candidate.is_file():
            return candidate
    raise ConfigurationError(f'Scenario "{name}" not found (looked at {", ".join(map(str, candidates))})')
