import dataclasses
import io
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from conftest import make_instance, random_small_instance
from ponplan.casestudy import load_case_study
from ponplan.costs import total_cost
from ponplan.ilp import (
    FAMILIES,
    ModelSizeError,
    PlanStructureError,
    Sense,
    VariableId,
    VarKind,
    build_model,
    export_lp,
    verify_plan,
)
from ponplan.plan import DeploymentPlan
from ponplan.solver import brute_force

DATA = Path(__file__).parent / "data"


def lp_text(model):
    buf = io.StringIO()
    export_lp(model, buf)
    return buf.getvalue()


def test_minimal_model_has_five_binaries_and_every_family(tiny):
    model = build_model(tiny)
    assert len(model.variables) == 5
    assert {v.kind for v in model.variables} == set(VarKind)
    assert model.families() == set(FAMILIES)
    assert not model.problems()


def test_every_variable_is_constrained_and_costs_are_nonnegative():
    model = build_model(random_small_instance(np.random.default_rng(3), 2, 3, 4))
    used = {v for row in model.constraints for v, _ in row.terms}
    assert used == set(model.variables)
    assert all(c >= 0 for _, c in model.objective)
    assert model.objective_constant >= 0
    for row in model.constraints:
        names = [v for v, _ in row.terms]
        assert len(names) == len(set(names)), row.name


def test_objective_coefficients_match_hand_prices(tiny):
    # horizon 10, O&M on equipment: equipment counted once plus 10 years of 10 %
    f = 1 + 10 * Fraction(1, 10)
    do_energy = Fraction("0.15") * 8760 * (255 + 500) / 1000
    ru_energy = Fraction("0.15") * 8760 * 104 / 1000
    expected = {
        VariableId(VarKind.C_I, (0,)): 75000 * f,
        VariableId(VarKind.S_J, (0,)): 100 * f,
        VariableId(VarKind.X_IJ, (0, 0)): (6500 + 250) * f + 10 * do_energy + 3 * 20000,
        VariableId(VarKind.X_JR, (0, 0)): 4 * 20000,
        VariableId(VarKind.R_R, (0,)): 3500 * f + 10 * (ru_energy + 8000),
    }
    model = build_model(tiny)
    assert dict(model.objective) == expected
    assert model.objective_constant == 0


def test_lp_export_matches_golden_file(tiny):
    assert lp_text(build_model(tiny)) == (DATA / "tiny_111.lp").read_text()


def test_lp_export_is_deterministic_and_sorted():
    inst = random_small_instance(np.random.default_rng(11), 2, 3, 5)
    a, b = lp_text(build_model(inst)), lp_text(build_model(inst))
    assert a == b
    binaries = a.split("Binary\n")[1].split("\nEnd")[0].split()
    kinds = [name.split("_")[0] for name in binaries]
    order = {"x": 0, "C": 2, "S": 3, "R": 4}
    assert [order[k] for k in kinds] == sorted(order[k] for k in kinds)


def test_lp_export_to_path_and_byte_stream(tiny, tmp_path):
    model = build_model(tiny)
    export_lp(model, tmp_path / "m.lp")
    raw = io.BytesIO()
    export_lp(model, raw)
    assert raw.getvalue().decode() == (tmp_path / "m.lp").read_text() == lp_text(model)


def test_lp_export_refuses_empty_model(tiny):
    empty = dataclasses.replace(build_model(tiny), variables=(), objective=(), constraints=())
    with pytest.raises(ValueError, match="no variables"):
        export_lp(empty, io.StringIO())


def test_case_study_ratio_and_co_capacity_rows():
    inst = load_case_study()
    model = build_model(inst)
    eq14 = [r for r in model.constraints if r.tag == "eq14"]
    assert len(eq14) == len(inst.splitters)
    assert all(r.rhs == 16 and r.sense is Sense.LE for r in eq14)
    assert eq14[6].name == "eq14_s6"
    eq18 = [r for r in model.constraints if r.tag == "eq18"]
    assert len(eq18) == len(inst.cos)
    for k, row in enumerate(eq18):
        terms = dict(row.terms)
        assert terms[VariableId(VarKind.C_I, (k,))] == -10 and row.rhs == 0


def test_size_guard_reports_counts(tiny):
    with pytest.raises(ModelSizeError, match="5"):
        build_model(tiny, max_variables=4)


def test_big_m_constants_are_tightest(tiny):
    meta = build_model(tiny).metadata
    assert meta["big_m_dist"] == 7
    assert meta["big_m_delay"] == 35


def test_d1_limit_can_target_the_feeder():
    inst = make_instance([(0, 0)], [(3, 0)], [(3, 4)], d1_applies_to="feeder", max_distribution_fiber=2)
    rows = [r for r in build_model(inst).constraints if r.tag == "eq25"]
    assert [v.kind for r in rows for v, _ in r.terms] == [VarKind.X_IJ]


def _star(n_rus):
    rus = [(1 + 0.01 * k, 1) for k in range(n_rus)]
    return make_instance([(0, 0)], [(1, 0)], rus)


def test_seventeen_rus_on_one_splitter_break_the_ratio_row():
    inst = _star(17)
    plan = DeploymentPlan({"c1"}, {"s1"}, {f"r{k + 1}": "s1" for k in range(17)}, {"s1": "c1"})
    verdict = verify_plan(plan, build_model(inst))
    assert not verdict.feasible
    (v,) = verdict.by_tag("eq14")
    assert v.slack == -1 and v.name == "eq14_s0"


def test_eleven_km_path_breaks_the_delay_row():
    inst = make_instance([(0, 0)], [(6, 0)], [(11, 0)])
    plan = DeploymentPlan({"c1"}, {"s1"}, {"r1": "s1"}, {"s1": "c1"})
    verdict = verify_plan(plan, build_model(inst))
    assert [v.tag for v in verdict.violations] == ["eq24"]
    assert "path delay 55 us" in verdict.violations[0].detail


def test_missing_ru_is_reported():
    inst = _star(2)
    plan = DeploymentPlan({"c1"}, {"s1"}, {"r1": "s1"}, {"s1": "c1"})
    tags = {v.tag for v in verify_plan(plan, build_model(inst)).violations}
    assert {"eq13", "fix"} <= tags


def test_unknown_sites_are_a_structural_error(tiny):
    plan = DeploymentPlan({"c9"}, {"s1"}, {"r1": "s1"}, {"s1": "c9"})
    with pytest.raises(PlanStructureError, match="c9"):
        verify_plan(plan, build_model(tiny))


def _random_plan(inst, rng):
    assign = {ru.id: inst.splitters[int(rng.integers(len(inst.splitters)))].id for ru in inst.rus}
    used = sorted(set(assign.values()))
    homing = {s: inst.cos[int(rng.integers(len(inst.cos)))].id for s in used}
    return DeploymentPlan(set(homing.values()), set(used), assign, homing)


@pytest.mark.parametrize("seed", range(40))
def test_objective_equals_cost_engine_tco(seed):
    rng = np.random.default_rng(seed)
    inst = random_small_instance(rng, 3, 4, 6)
    model = build_model(inst)
    plan = _random_plan(inst, rng)
    verdict = verify_plan(plan, model)
    assert verdict.objective == total_cost(plan, inst, model, check=False).tco


@pytest.mark.parametrize("seed", range(25))
def test_optimal_plans_satisfy_the_counting_identities(seed):
    inst = random_small_instance(np.random.default_rng(100 + seed))
    model = build_model(inst)
    result = brute_force(model)
    if result.plan is None:
        pytest.skip("infeasible draw")
    plan = result.plan
    verdict = verify_plan(plan, model)
    assert verdict.feasible and float(verdict.objective) == plan.objective_value
    assert len(plan.open_splitters) == len(plan.splitter_homing)
    assert set(plan.ru_assignment) == {r.id for r in inst.rus}
    assert set(plan.splitter_homing.values()) == set(plan.open_cos)
    assert total_cost(plan, inst, model).tco == verdict.objective


@pytest.mark.parametrize("seed", range(20))
def test_slack_delay_rows_do_not_move_the_optimum(seed):
    inst = random_small_instance(np.random.default_rng(300 + seed))
    dm_bound = 0.5 * 2 * 2 * np.sqrt(2)  # tau * (max feeder + max distribution) in a 2 km square
    inst = inst.with_params(delay_per_km=0.5, max_delay=float(np.ceil(dm_bound)))
    full = brute_force(build_model(inst))
    relaxed = brute_force(build_model(inst, drop_families=("eq24",)))
    assert full.status == relaxed.status
    if full.plan is not None:
        assert full.plan.objective_value == relaxed.plan.objective_value
