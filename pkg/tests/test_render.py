import xml.etree.ElementTree as ET

import pytest

from conftest import make_instance
from ponplan.casestudy import load_case_study
from ponplan.ilp import build_model
from ponplan.model import compute_distances
from ponplan.plan import DeploymentPlan
from ponplan.render import RenderError, RenderStyle, render_map, save_map
from ponplan.solver import solve

NS = "{http://www.w3.org/2000/svg}"


def parse(svg):
    return ET.fromstring(svg.encode())


def lines_of(root, css):
    return [el for el in root.iter(f"{NS}line") if el.get("class") == css]


def markers(root, css_prefix):
    return [el for el in root.iter() if (el.get("class") or "").startswith(css_prefix)]


def test_empty_plan_draws_markers_only(tiny):
    root = parse(render_map(tiny, DeploymentPlan(set(), set(), {}, {})))
    assert not lines_of(root, "feeder") and not lines_of(root, "distribution")
    assert len(markers(root, "site closed")) == 2  # the candidate CO and splitter
    assert len(markers(root, "site open ru_onu")) == 1


def test_colocated_chain_suppresses_zero_length_links(colocated):
    plan = DeploymentPlan({"c1"}, {"s1"}, {"r1": "s1"}, {"s1": "c1"})
    root = parse(render_map(colocated, plan))
    assert not lines_of(root, "feeder") and not lines_of(root, "distribution")
    assert len(markers(root, "site open")) == 3
    circle = next(root.iter(f"{NS}circle"))
    rect = next(el for el in root.iter(f"{NS}rect") if el.get("class") == "site open splitter")
    assert float(rect.get("x")) + float(rect.get("width")) / 2 == pytest.approx(float(circle.get("cx")))


def test_line_styles_follow_link_type(tiny):
    plan = DeploymentPlan({"c1"}, {"s1"}, {"r1": "s1"}, {"s1": "c1"})
    root = parse(render_map(tiny, plan))
    (feeder,) = lines_of(root, "feeder")
    (dist,) = lines_of(root, "distribution")
    assert feeder.get("stroke-dasharray") and not dist.get("stroke-dasharray")
    style = RenderStyle()
    assert feeder.get("stroke") == style.feeder_color and dist.get("stroke") == style.distribution_color
    # 3 km feeder at 60 px/km
    assert float(feeder.get("x2")) - float(feeder.get("x1")) == pytest.approx(180)


def test_legend_and_scale_bar_present(tiny):
    svg = render_map(tiny, DeploymentPlan(set(), set(), {}, {}), RenderStyle(title="demo"))
    root = parse(svg)
    ids = {el.get("id") for el in root.iter()}
    assert {"legend", "scale-bar", "sites", "feeder-links", "distribution-links"} <= ids
    assert "1 km" in svg and "demo" in svg


def test_unknown_sites_are_rejected(tiny):
    plan = DeploymentPlan({"c1"}, {"s7"}, {"r1": "s7"}, {"s7": "c1"})
    with pytest.raises(RenderError, match="s7"):
        render_map(tiny, plan)


def test_north_is_up():
    inst = make_instance([(0, 0)], [(0, 2)], [(0, 4)])
    plan = DeploymentPlan({"c1"}, {"s1"}, {"r1": "s1"}, {"s1": "c1"})
    root = parse(render_map(inst, plan))
    (feeder,) = lines_of(root, "feeder")
    assert float(feeder.get("y1")) > float(feeder.get("y2"))


@pytest.fixture(scope="module")
def case_study_plan():
    inst = load_case_study().with_params(max_delay=30.0, split_ratio=16)
    return inst, solve(build_model(inst)).plan


def test_case_study_map_counts_one_line_per_link(case_study_plan, tmp_path):
    inst, plan = case_study_plan
    dm = compute_distances(inst)
    sp = {s.id: j for j, s in enumerate(inst.splitters)}
    co = {s.id: i for i, s in enumerate(inst.cos)}
    ru = {s.id: r for r, s in enumerate(inst.rus)}
    nonzero_dist = sum(1 for r, s in plan.ru_assignment.items() if dm.d_jr_mm[sp[s], ru[r]] > 0)
    nonzero_feed = sum(1 for s, c in plan.splitter_homing.items() if dm.d_ij_mm[co[c], sp[s]] > 0)

    path = tmp_path / "map.svg"
    save_map(inst, plan, path)
    root = parse(path.read_text())
    assert len(lines_of(root, "distribution")) == nonzero_dist
    assert len(lines_of(root, "feeder")) == nonzero_feed
    # every RU is drawn and every open splitter or CO gets one marker
    assert len(markers(root, "site open ru_onu")) == len(inst.rus)
    assert len(markers(root, "site open splitter")) == len(plan.open_splitters)
    assert len(markers(root, "site open central_office")) == len(plan.open_cos)
    assert len(markers(root, "site closed")) == len(inst.cos) + len(inst.splitters) - len(
        plan.open_cos) - len(plan.open_splitters)


def test_render_is_byte_identical(case_study_plan):
    inst, plan = case_study_plan
    assert render_map(inst, plan) == render_map(inst, plan)
