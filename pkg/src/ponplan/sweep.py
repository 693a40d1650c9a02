"""Delay-threshold x split-ratio sweeps and their trend checks."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

from .costs import CostReport, total_cost
from .ilp import build_model
from .model import InstanceError, PlanningInstance, compute_distances, feasibility_issues
from .plan import DeploymentPlan
from .solver import SolveOptions, Status, solve

log = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (10.0, 20.0, 30.0, 40.0, 50.0)
DEFAULT_RATIOS = (4, 8, 16)
ERROR = "Error"


class IncompleteReportError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioGrid:
    base_instance: PlanningInstance
    delay_thresholds: Sequence[float] = DEFAULT_THRESHOLDS
    split_ratios: Sequence[int] = DEFAULT_RATIOS
    horizon_years: int | None = None  # None keeps the instance's horizon

    def __post_init__(self):
        object.__setattr__(self, "delay_thresholds", tuple(float(t) for t in self.delay_thresholds))
        object.__setattr__(self, "split_ratios", tuple(int(r) for r in self.split_ratios))
        if not self.delay_thresholds or not self.split_ratios:
            raise ValueError("grid needs at least one threshold and one ratio")
        if list(self.delay_thresholds) != sorted(self.delay_thresholds):
            raise ValueError("delay thresholds must be sorted ascending")
        if len(set(self.delay_thresholds)) != len(self.delay_thresholds) or \
                len(set(self.split_ratios)) != len(self.split_ratios):
            raise ValueError("grid values must be distinct")

    def points(self) -> list[tuple[float, int]]:
        return [(t, r) for t in self.delay_thresholds for r in self.split_ratios]

    def cell_instance(self, threshold: float, ratio: int) -> PlanningInstance:
        changes: dict[str, Any] = {"max_delay": threshold, "split_ratio": ratio}
        if self.horizon_years is not None:
            changes["horizon_years"] = self.horizon_years
        return self.base_instance.with_params(**changes)


@dataclass
class SweepCell:
    threshold_us: float
    ratio: int
    status: str
    message: str = ""
    objective: float | None = None
    report: CostReport | None = None
    plan: DeploymentPlan | None = None
    nodes: int = 0
    wall_time: float = 0.0

    @property
    def tco(self) -> float | None:
        return float(self.report.tco) if self.report is not None else None

    @property
    def solved(self) -> bool:
        return self.status in (Status.OPTIMAL.value, Status.INFEASIBLE.value)

    def tco_or_inf(self) -> float:
        return self.tco if self.tco is not None else math.inf

    def opex_or_inf(self) -> float:
        return float(self.report.opex_total) if self.report is not None else math.inf


@dataclass
class SweepReport:
    grid: ScenarioGrid
    cells: list[SweepCell] = field(default_factory=list)

    def cell(self, threshold: float, ratio: int) -> SweepCell:
        for c in self.cells:
            if c.threshold_us == float(threshold) and c.ratio == int(ratio):
                return c
        raise KeyError((threshold, ratio))

    def is_complete(self) -> bool:
        have = {(c.threshold_us, c.ratio) for c in self.cells}
        return all(pt in have for pt in self.grid.points())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.cells:
            w.writerow(_csv_row(c))
        return buf.getvalue()

    def to_dict(self) -> dict[str, Any]:
        return {
            "instance": self.grid.base_instance.name,
            "delay_thresholds": list(self.grid.delay_thresholds),
            "split_ratios": list(self.grid.split_ratios),
            "cells": [
                {
                    "threshold_us": c.threshold_us,
                    "ratio": c.ratio,
                    "status": c.status,
                    "message": c.message,
                    "objective": c.objective,
                    "cost_report": c.report.to_dict() if c.report is not None else None,
                    "plan": c.plan.to_dict() if c.plan is not None else None,
                    "stats": {"nodes_explored": c.nodes, "wall_time": c.wall_time},
                }
                for c in self.cells
            ],
        }


CSV_COLUMNS = (
    "threshold_us", "ratio", "status", "tco",
    "capex_equipment", "capex_infrastructure", "capex_installation", "capex_total",
    "opex_energy", "opex_om", "opex_site_rental", "opex_total",
    "n_cos", "n_splitters", "n_dos", "n_awgs", "feeder_km", "distribution_km", "fiber_km", "nodes",
)


def _csv_row(c: SweepCell) -> list[str]:
    head = [f"{c.threshold_us:g}", str(c.ratio), c.status]
    if c.report is None:
        return head + [""] * (len(CSV_COLUMNS) - len(head) - 1) + [str(c.nodes)]
    rep, plan = c.report, c.plan
    money = [float(x) for x in (
        rep.tco, rep.capex_equipment, rep.capex_infrastructure, rep.capex_installation, rep.capex_total,
        rep.opex_energy, rep.opex_om, rep.opex_site_rental, rep.opex_total,
    )]
    counts = rep.unit_counts
    return head + [f"{x:.6f}" for x in money] + [
        str(counts.n_cos), str(counts.n_splitters), str(counts.n_dos), str(counts.n_awgs),
        f"{plan.feeder_km:.6f}", f"{plan.distribution_km:.6f}", f"{float(rep.fiber_length_total):.6f}",
        str(c.nodes),
    ]


def solve_cell(grid: ScenarioGrid, threshold: float, ratio: int, opts: SolveOptions) -> SweepCell:
    """Solve one grid point; failures are recorded in the cell, never raised."""
    t0 = time.perf_counter()
    try:
        inst = grid.cell_instance(threshold, ratio)
        dm = compute_distances(inst)
        issues = feasibility_issues(inst, dm)
        if issues:
            return SweepCell(threshold, ratio, Status.INFEASIBLE.value, issues[0],
                             wall_time=time.perf_counter() - t0)
        model = build_model(inst, dm)
        result = solve(model, opts)
        cell = SweepCell(threshold, ratio, result.status.value, result.message,
                         nodes=result.stats.nodes_explored)
        if result.plan is not None:
            cell.plan = result.plan
            cell.objective = result.plan.objective_value
            cell.report = total_cost(result.plan, inst, model)
    except (InstanceError, ValueError) as exc:
        cell = SweepCell(threshold, ratio, ERROR, str(exc))
    cell.wall_time = time.perf_counter() - t0
    log.info("cell %g us 1:%d -> %s in %.1fs", threshold, ratio, cell.status, cell.wall_time)
    return cell


def run_sweep(grid: ScenarioGrid, opts: SolveOptions | None = None, *, workers: int = 1,
              total_time_limit: float | None = None,
              on_cell: Callable[[SweepCell], None] | None = None) -> SweepReport:
    """Solve every grid point independently; the report follows grid order."""
    opts = opts if opts is not None else SolveOptions()
    points = grid.points()
    if total_time_limit is not None:
        opts = replace(opts, time_limit=min(opts.time_limit, total_time_limit / len(points)))
    cells: dict[tuple[float, int], SweepCell] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pt: pool.submit(solve_cell, grid, pt[0], pt[1], opts) for pt in points}
            for pt, fut in futures.items():
                cells[pt] = fut.result()
                if on_cell:
                    on_cell(cells[pt])
    else:
        for pt in points:
            cells[pt] = solve_cell(grid, pt[0], pt[1], opts)
            if on_cell:
                on_cell(cells[pt])
    return SweepReport(grid, [cells[pt] for pt in points])


@dataclass(frozen=True)
class TrendVerdict:
    check: str
    scope: str
    outcome: str  # pass | fail | inconclusive
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.outcome == "pass"


def _chain(cells: list[SweepCell], value: Callable[[SweepCell], float], label: str) -> tuple[str, str]:
    """Check value(cells[k]) >= value(cells[k+1]) along the chain."""
    if not all(c.solved for c in cells):
        bad = [f"{c.threshold_us:g}us/1:{c.ratio}={c.status}" for c in cells if not c.solved]
        return "inconclusive", "unproven cells: " + ", ".join(bad)
    vals = [value(c) for c in cells]
    for a, b, ca, cb in zip(vals, vals[1:], cells, cells[1:]):
        if a < b:
            return "fail", f"{label} rises from {a:.2f} to {b:.2f} between {_tag(ca)} and {_tag(cb)}"
    return "pass", " >= ".join("inf" if math.isinf(v) else f"{v:.2f}" for v in vals)


def _tag(c: SweepCell) -> str:
    return f"{c.threshold_us:g}us/1:{c.ratio}"


def trend_checks(report: SweepReport) -> list[TrendVerdict]:
    """Delay monotonicity (hard) and the two split-ratio trends (observational)."""
    if not report.is_complete():
        raise IncompleteReportError("report is missing grid cells")
    grid = report.grid
    out = []
    for ratio in grid.split_ratios:
        chain = [report.cell(t, ratio) for t in grid.delay_thresholds]
        outcome, detail = _chain(chain, SweepCell.tco_or_inf, "TCO")
        out.append(TrendVerdict("delay_monotonicity", f"1:{ratio}", outcome, detail))
    ratios = sorted(grid.split_ratios)
    for t in grid.delay_thresholds:
        chain = [report.cell(t, r) for r in ratios]
        outcome, detail = _chain(chain, SweepCell.tco_or_inf, "TCO")
        out.append(TrendVerdict("ratio_ordering", f"{t:g}us", outcome, detail))
    for t in grid.delay_thresholds:
        chain = [report.cell(t, r) for r in ratios]
        outcome, detail = _chain(chain, SweepCell.opex_or_inf, "Opex")
        out.append(TrendVerdict("opex_ordering", f"{t:g}us", outcome, detail))
    return out


def verdicts_csv(verdicts: Sequence[TrendVerdict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "scope", "outcome", "detail"])
    for v in verdicts:
        w.writerow([v.check, v.scope, v.outcome, v.detail])
    return buf.getvalue()
