"""Deployment plans and canonical JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping


def _round_floats(obj: Any, places: int = 6) -> Any:
    if isinstance(obj, float):
        value = round(obj, places)
        return 0.0 if value == 0 else value
    if isinstance(obj, dict):
        return {k: _round_floats(v, places) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, places) for v in obj]
    return obj


def dumps_canonical(obj: Any) -> str:
    """Sorted keys, floats fixed to 6 decimals: stable enough for golden files."""
    return json.dumps(_round_floats(obj), indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class DeploymentPlan:
    open_cos: frozenset[str]
    open_splitters: frozenset[str]
    ru_assignment: Mapping[str, str]  # RU id -> splitter id
    splitter_homing: Mapping[str, str]  # splitter id -> CO id
    objective_value: float = float("nan")
    feeder_km: float = 0.0
    distribution_km: float = 0.0
    scenario: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "open_cos", frozenset(self.open_cos))
        object.__setattr__(self, "open_splitters", frozenset(self.open_splitters))
        object.__setattr__(self, "ru_assignment", dict(self.ru_assignment))
        object.__setattr__(self, "splitter_homing", dict(self.splitter_homing))
        object.__setattr__(self, "scenario", dict(self.scenario))

    @property
    def fiber_km(self) -> float:
        return self.feeder_km + self.distribution_km

    def structural_problems(self) -> list[str]:
        """Internal consistency, independent of any instance."""
        errs = []
        for ru, sp in sorted(self.ru_assignment.items()):
            if sp not in self.open_splitters:
                errs.append(f"RU {ru!r} assigned to splitter {sp!r} which is not open")
        for sp in sorted(self.open_splitters):
            if sp not in self.splitter_homing:
                errs.append(f"open splitter {sp!r} has no CO homing")
        for sp, co in sorted(self.splitter_homing.items()):
            if co not in self.open_cos:
                errs.append(f"splitter {sp!r} homed to CO {co!r} which is not open")
        return errs

    def to_dict(self) -> dict[str, Any]:
        return {
            "open_cos": sorted(self.open_cos),
            "open_splitters": sorted(self.open_splitters),
            "ru_assignment": dict(sorted(self.ru_assignment.items())),
            "splitter_homing": dict(sorted(self.splitter_homing.items())),
            "objective_value": self.objective_value,
            "fiber": {"feeder_km": self.feeder_km, "distribution_km": self.distribution_km},
            "scenario": dict(self.scenario),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> DeploymentPlan:
        fiber = doc.get("fiber", {})
        return cls(
            open_cos=frozenset(doc["open_cos"]),
            open_splitters=frozenset(doc["open_splitters"]),
            ru_assignment=dict(doc["ru_assignment"]),
            splitter_homing=dict(doc["splitter_homing"]),
            objective_value=float(doc.get("objective_value", float("nan"))),
            feeder_km=float(fiber.get("feeder_km", 0.0)),
            distribution_km=float(fiber.get("distribution_km", 0.0)),
            scenario=doc.get("scenario", {}),
        )


def save_plan(plan: DeploymentPlan, path) -> None:
    Path(path).write_text(dumps_canonical(plan.to_dict()))


def load_plan(path) -> DeploymentPlan:
    return DeploymentPlan.from_dict(json.loads(Path(path).read_text()))
