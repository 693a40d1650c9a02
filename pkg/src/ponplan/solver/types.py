from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

from ..plan import DeploymentPlan


class Mode(str, enum.Enum):
    EXACT_BNB = "exact_bnb"
    BRUTE_FORCE = "brute_force"


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"  # stopped inside gap_tolerance
    INFEASIBLE = "Infeasible"
    TIMED_OUT = "TimedOut"


@dataclass(frozen=True)
class SolveOptions:
    mode: Mode = Mode.EXACT_BNB
    time_limit: float = 900.0  # seconds
    gap_tolerance: float = 0.0
    seed: int = 0
    node_limit: int = 1_000_000
    size_guard: int = 2_000_000  # brute-force configuration budget

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.time_limit > 0:
            raise ValueError("time_limit must be > 0")
        if not 0 <= self.gap_tolerance < 1:
            raise ValueError("gap_tolerance must lie in [0, 1)")
        if self.node_limit <= 0:
            raise ValueError("node_limit must be > 0")


@dataclass
class SolveStats:
    nodes_explored: int = 0
    wall_time: float = 0.0
    lp_solves: int = 0
    best_incumbent_trace: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes_explored": self.nodes_explored,
            "wall_time": self.wall_time,
            "lp_solves": self.lp_solves,
            "best_incumbent_trace": [list(t) for t in self.best_incumbent_trace],
        }


@dataclass
class SolveResult:
    status: Status
    plan: DeploymentPlan | None
    bound: float
    stats: SolveStats = field(default_factory=SolveStats)
    gap: float = math.nan
    message: str = ""

    @property
    def objective(self) -> float:
        return self.plan.objective_value if self.plan is not None else math.inf

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status.value,
            "gap": None if math.isnan(self.gap) else self.gap,
            "bound": None if math.isinf(self.bound) or math.isnan(self.bound) else self.bound,
            "message": self.message,
            "plan": self.plan.to_dict() if self.plan is not None else None,
            "stats": self.stats.to_dict(),
        }

    def trace_csv(self) -> str:
        lines = ["wall_time,objective"]
        lines += [f"{t:.6f},{obj:.6f}" for t, obj in self.stats.best_incumbent_trace]
        return "\n".join(lines) + "\n"
