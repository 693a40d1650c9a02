import json

import pytest

from conftest import make_instance
from ponplan import cli
from ponplan.ilp import build_model, export_lp
from ponplan.model import save_instance
from ponplan.plan import DeploymentPlan, load_plan, save_plan


@pytest.fixture
def inst_file(tmp_path, tiny):
    path = tmp_path / "tiny.json"
    save_instance(tiny, path)
    return path


@pytest.fixture(autouse=True)
def no_config(monkeypatch):
    monkeypatch.delenv(cli.CONFIG_ENV, raising=False)


def test_validate_bundled_and_file(inst_file, capsys):
    assert cli.main(["validate", "case_study"]) == 0
    assert "34 RU/ONU" in capsys.readouterr().out
    assert cli.main(["validate", str(inst_file)]) == 0


def test_validate_reports_unreachable_ru(tmp_path):
    far = make_instance([(0, 0)], [(1, 0)], [(1, 1), (40, 0)])
    save_instance(far, tmp_path / "far.json")
    assert cli.main(["validate", str(tmp_path / "far.json")]) == 1


def test_validate_malformed_file(tmp_path, capsys):
    (tmp_path / "bad.json").write_text('{"sites": 3}')
    assert cli.main(["validate", str(tmp_path / "bad.json")]) == 1
    assert "sites" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [[], ["solve"], ["solve", "x.json", "--bogus"], ["frobnicate"],
                                  ["solve", "case_study", "--ratio", "sixteen"]])
def test_usage_errors_exit_2(argv):
    assert cli.main(argv) == 2


def test_missing_instance_is_a_usage_error():
    assert cli.main(["validate", "definitely/not/here.json"]) == 2


def test_solve_then_verify_round_trip(inst_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["solve", str(inst_file), "--out-dir", str(out), "--svg", str(out / "map.svg")]) == 0
    for name in ("plan.json", "cost_report.json", "cost_report.csv", "solve_result.json",
                 "incumbent_trace.csv", "map.svg"):
        assert (out / name).exists(), name
    assert "Optimal" in capsys.readouterr().out
    assert cli.main(["verify", str(inst_file), str(out / "plan.json")]) == 0
    report = json.loads((out / "cost_report.json").read_text())
    assert report["tco"] == pytest.approx(load_plan(out / "plan.json").objective_value)


def test_verify_uses_the_plan_scenario(inst_file, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["solve", str(inst_file), "--delay-us", "40", "--out-dir", str(out)]) == 0
    assert load_plan(out / "plan.json").scenario["max_delay_us"] == 40
    # the 7 km path needs 35 us, so the plan fails a tighter explicit budget
    assert cli.main(["verify", str(inst_file), str(out / "plan.json"), "--delay-us", "30"]) == 1


def test_verify_flags_a_tampered_plan(tmp_path, capsys):
    inst = make_instance([(0, 0)], [(1, 0), (6, 0)], [(1, 1), (11, 0)])
    save_instance(inst, tmp_path / "line.json")
    good = DeploymentPlan({"c1"}, {"s1", "s2"}, {"r1": "s1", "r2": "s2"}, {"s1": "c1", "s2": "c1"})
    save_plan(good, tmp_path / "plan.json")
    # r2 sits 11 km from the only CO: 55 us > 50 us
    assert cli.main(["verify", str(tmp_path / "line.json"), str(tmp_path / "plan.json")]) == 1
    out = capsys.readouterr().out
    assert "eq24" in out and "path delay 55 us" in out


def test_verify_unknown_site_exits_1(inst_file, tmp_path):
    save_plan(DeploymentPlan({"c1"}, {"s9"}, {"r1": "s9"}, {"s9": "c1"}), tmp_path / "p.json")
    assert cli.main(["verify", str(inst_file), str(tmp_path / "p.json")]) == 1


def test_infeasible_solve_exits_1(inst_file, tmp_path, capsys):
    assert cli.main(["solve", str(inst_file), "--delay-us", "5", "--out-dir", str(tmp_path)]) == 1
    assert "infeasible" in capsys.readouterr().err


def test_solve_modes_agree(inst_file, tmp_path):
    for mode in ("exact_bnb", "brute_force"):
        assert cli.main(["solve", str(inst_file), "--mode", mode, "--out-dir", str(tmp_path / mode)]) == 0
    a = load_plan(tmp_path / "exact_bnb" / "plan.json")
    b = load_plan(tmp_path / "brute_force" / "plan.json")
    assert a.objective_value == b.objective_value


def test_export_lp_writes_model(inst_file, tmp_path, tiny):
    assert cli.main(["export-lp", str(inst_file), str(tmp_path / "m.lp")]) == 0
    export_lp(build_model(tiny), tmp_path / "ref.lp")
    assert (tmp_path / "m.lp").read_text() == (tmp_path / "ref.lp").read_text()


def test_render_writes_svg(inst_file, tmp_path):
    save_plan(DeploymentPlan({"c1"}, {"s1"}, {"r1": "s1"}, {"s1": "c1"}), tmp_path / "p.json")
    assert cli.main(["render", str(inst_file), str(tmp_path / "p.json"), str(tmp_path / "m.svg")]) == 0
    assert (tmp_path / "m.svg").read_text().startswith("<?xml")


def test_sweep_writes_tables_and_figures(tmp_path, capsys):
    inst = make_instance([(0, 0), (3, 3)], [(0.5, 0.5), (2.5, 2.5)], [(1, 0.5), (0.4, 1), (2.5, 3), (3, 2.4)])
    save_instance(inst, tmp_path / "i.json")
    (tmp_path / "grid.json").write_text(json.dumps({"delay_thresholds": [5, 20], "split_ratios": [4, 16]}))
    out = tmp_path / "sweep"
    argv = ["sweep", str(tmp_path / "i.json"), "--grid-file", str(tmp_path / "grid.json"), "--out-dir", str(out)]
    assert cli.main(argv) == 0
    for name in ("sweep.csv", "sweep.json", "trends.csv", "tco_vs_delay.png", "capex_breakdown.png",
                 "opex_breakdown.png"):
        assert (out / name).exists(), name
    assert len((out / "sweep.csv").read_text().splitlines()) == 5
    assert "delay_monotonicity" in capsys.readouterr().out


def test_sweep_rejects_bad_grid_file(inst_file, tmp_path):
    (tmp_path / "g.json").write_text(json.dumps({"delay_thresholds": [30, 10]}))
    assert cli.main(["sweep", str(inst_file), "--grid-file", str(tmp_path / "g.json"),
                     "--out-dir", str(tmp_path)]) == 2
    (tmp_path / "g.json").write_text(json.dumps({"thresholds": [10]}))
    assert cli.main(["sweep", str(inst_file), "--grid-file", str(tmp_path / "g.json"),
                     "--out-dir", str(tmp_path)]) == 2


def test_config_file_supplies_defaults(inst_file, tmp_path, monkeypatch):
    seen = {}

    def fake_solve(model, opts):
        seen["opts"] = opts
        raise RuntimeError("stop here")

    (tmp_path / "cfg.json").write_text(json.dumps({"time_limit": 12.5, "seed": 9}))
    monkeypatch.setenv(cli.CONFIG_ENV, str(tmp_path / "cfg.json"))
    monkeypatch.setattr(cli, "solve", fake_solve)
    assert cli.main(["solve", str(inst_file), "--out-dir", str(tmp_path)]) == 3
    assert seen["opts"].time_limit == 12.5 and seen["opts"].seed == 9
    cli.main(["solve", str(inst_file), "--seed", "4", "--out-dir", str(tmp_path)])
    assert seen["opts"].seed == 4


def test_unreadable_config_is_a_usage_error(tmp_path, monkeypatch):
    (tmp_path / "cfg.json").write_text("{not json")
    monkeypatch.setenv(cli.CONFIG_ENV, str(tmp_path / "cfg.json"))
    assert cli.main(["validate", "case_study"]) == 2


def test_internal_errors_exit_3(inst_file, monkeypatch, capsys):
    def boom(*_args, **_kwargs):
        raise RuntimeError("kaboom")

    monkeypatch.setattr(cli, "build_model", boom)
    assert cli.main(["export-lp", str(inst_file), "x.lp"]) == 3
    assert "kaboom" in capsys.readouterr().err
