import dataclasses
import json

import pytest

from conftest import make_instance
from ponplan.costs import CostTable, total_cost
from ponplan.ilp import build_model
from ponplan.plan import dumps_canonical
from ponplan.solver import SolveOptions, solve
from ponplan.sweep import (
    CSV_COLUMNS,
    IncompleteReportError,
    ScenarioGrid,
    SweepCell,
    SweepReport,
    run_sweep,
    solve_cell,
    trend_checks,
    verdicts_csv,
)


@pytest.fixture(scope="module")
def cluster():
    """Six RUs around two hotspots, two CO sites, four splitter sites."""
    rus = [(1.0, 1.0), (1.3, 1.2), (1.1, 0.7), (3.0, 3.1), (3.3, 2.8), (2.8, 3.2)]
    return make_instance([(0.5, 0.5), (3.5, 3.5)], [(1.1, 1.0), (1.2, 0.9), (3.0, 3.0), (2.0, 2.0)], rus,
                         name="cluster", max_distribution_fiber=2.0)


@pytest.fixture(scope="module")
def report(cluster):
    grid = ScenarioGrid(cluster, delay_thresholds=(5, 10, 20, 40), split_ratios=(4, 8, 16))
    return run_sweep(grid, SolveOptions())


def test_grid_validation(cluster):
    with pytest.raises(ValueError, match="sorted"):
        ScenarioGrid(cluster, delay_thresholds=(20, 10))
    with pytest.raises(ValueError):
        ScenarioGrid(cluster, delay_thresholds=())
    with pytest.raises(ValueError, match="distinct"):
        ScenarioGrid(cluster, split_ratios=(8, 8))


def test_default_grid_is_the_fifteen_cell_study(cluster):
    grid = ScenarioGrid(cluster)
    assert grid.delay_thresholds == (10, 20, 30, 40, 50)
    assert grid.split_ratios == (4, 8, 16)
    assert len(grid.points()) == 15


def test_report_has_one_cell_per_point_in_grid_order(report):
    assert report.is_complete()
    assert [(c.threshold_us, c.ratio) for c in report.cells] == report.grid.points()


def test_unreachable_threshold_is_recorded_not_raised(report):
    cell = report.cell(5, 4)
    assert cell.status == "Infeasible"
    assert "no (splitter, CO) chain" in cell.message
    assert cell.report is None and cell.tco is None


def test_cell_tco_matches_cost_engine(report):
    for cell in report.cells:
        if cell.plan is None:
            continue
        inst = report.grid.cell_instance(cell.threshold_us, cell.ratio)
        rep = total_cost(cell.plan, inst)
        assert rep.tco == cell.report.tco
        assert float(rep.tco) == pytest.approx(cell.objective, rel=1e-12)
        assert rep.identities_hold()


def test_single_cell_grid_equals_direct_solve(cluster):
    grid = ScenarioGrid(cluster, delay_thresholds=(50,), split_ratios=(16,))
    (cell,) = run_sweep(grid).cells
    direct = solve(build_model(cluster.with_params(max_delay=50.0, split_ratio=16)))
    assert cell.status == direct.status.value
    assert dumps_canonical(cell.plan.to_dict()) == dumps_canonical(direct.plan.to_dict())


def test_cells_do_not_depend_on_evaluation_order(report):
    grid = report.grid
    for t, r in reversed(grid.points()[-4:]):
        again = solve_cell(grid, t, r, SolveOptions())
        before = report.cell(t, r)
        assert again.status == before.status
        assert again.plan == before.plan


def test_parallel_sweep_gives_the_same_report(cluster, report):
    grid = ScenarioGrid(cluster, delay_thresholds=(10, 40), split_ratios=(4, 16))
    parallel = run_sweep(grid, workers=2)
    for cell in parallel.cells:
        assert cell.plan == report.cell(cell.threshold_us, cell.ratio).plan


def test_total_time_cap_splits_evenly(cluster, monkeypatch):
    seen = []
    import ponplan.sweep as sweep_mod

    def fake(grid, t, r, opts):
        seen.append(opts.time_limit)
        return SweepCell(t, r, "Optimal")

    monkeypatch.setattr(sweep_mod, "solve_cell", fake)
    grid = ScenarioGrid(cluster, delay_thresholds=(10, 20), split_ratios=(4, 8))
    run_sweep(grid, SolveOptions(time_limit=100), total_time_limit=60)
    assert seen == [15.0] * 4


def test_csv_layout(report):
    rows = report.to_csv().splitlines()
    assert tuple(rows[0].split(",")) == CSV_COLUMNS
    assert len(rows) == 1 + len(report.cells)
    infeasible = rows[1].split(",")
    assert infeasible[:3] == ["5", "4", "Infeasible"] and infeasible[3] == ""
    solved = dict(zip(CSV_COLUMNS, rows[-1].split(",")))
    cell = report.cells[-1]
    assert float(solved["tco"]) == pytest.approx(cell.tco, abs=1e-6)
    assert int(solved["n_splitters"]) == len(cell.plan.open_splitters)


def test_json_layout(report):
    doc = json.loads(json.dumps(report.to_dict()))
    assert doc["split_ratios"] == [4, 8, 16]
    assert len(doc["cells"]) == 12
    solved = [c for c in doc["cells"] if c["plan"] is not None]
    assert all(c["cost_report"]["tco"] == pytest.approx(c["objective"]) for c in solved)


def test_delay_monotonicity_holds(report):
    verdicts = {(v.check, v.scope): v for v in trend_checks(report)}
    for ratio in (4, 8, 16):
        assert verdicts[("delay_monotonicity", f"1:{ratio}")].passed
    for cell_ratio in (4, 8, 16):
        tcos = [report.cell(t, cell_ratio).tco_or_inf() for t in report.grid.delay_thresholds]
        assert tcos == sorted(tcos, reverse=True)


def test_verdicts_cover_every_scope(report):
    verdicts = trend_checks(report)
    assert len(verdicts) == 3 + 4 + 4
    assert verdicts_csv(verdicts).splitlines()[0] == "check,scope,outcome,detail"


def test_adversarial_prices_can_flip_the_ratio_trend(cluster):
    costs = dataclasses.replace(CostTable(), splitter_by_ratio={4: 0.0, 8: 50.0, 16: 500000.0})
    grid = ScenarioGrid(dataclasses.replace(cluster, costs=costs), delay_thresholds=(40,), split_ratios=(4, 16))
    verdicts = trend_checks(run_sweep(grid))
    ratio = [v for v in verdicts if v.check == "ratio_ordering"]
    assert ratio[0].outcome == "fail" and "rises" in ratio[0].detail


def test_unproven_cells_make_trends_inconclusive(report):
    cells = [dataclasses.replace(c) for c in report.cells]
    cells[-1].status = "TimedOut"
    verdicts = trend_checks(SweepReport(report.grid, cells))
    assert any(v.outcome == "inconclusive" for v in verdicts)


def test_incomplete_report_is_refused(report):
    with pytest.raises(IncompleteReportError):
        trend_checks(SweepReport(report.grid, report.cells[:-1]))


def test_figures_are_written(report, tmp_path):
    from ponplan.plotting import write_figures

    paths = write_figures(report, tmp_path)
    assert [p.name for p in paths] == ["tco_vs_delay.png", "capex_breakdown.png", "opex_breakdown.png"]
    for p in paths:
        assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n" and p.stat().st_size > 10_000
