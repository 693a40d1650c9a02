"""Command-line entry point: ``ponplan <subcommand> ...``.

Exit codes: 0 success, 1 invalid input / infeasible / verification failure,
2 usage error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path

from .casestudy import CASE_STUDY_NAME, load_case_study
from .costs import total_cost
from .ilp import InfeasiblePlanError, ModelSizeError, PlanStructureError, build_model, export_lp, verify_plan
from .model import InstanceError, PlanningInstance, compute_distances, feasibility_issues, load_instance
from .plan import dumps_canonical, load_plan, save_plan
from .render import RenderError, RenderStyle, save_map
from .solver import Mode, SolveOptions, Status, solve

CONFIG_ENV = "PONPLAN_CONFIG"
OK, FAILED, USAGE, INTERNAL = 0, 1, 2, 3

log = logging.getLogger("ponplan")


class UsageError(Exception):
    pass


def _load_config() -> dict:
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return doc


def _instance(source: str, check: bool = True) -> PlanningInstance:
    if source == CASE_STUDY_NAME:
        return load_case_study()
    if not Path(source).exists():
        raise UsageError(f"instance file not found: {source}")
    return load_instance(Path(source), check_feasibility=check)


def _scenario(inst: PlanningInstance, args) -> PlanningInstance:
    changes = {}
    if getattr(args, "delay_us", None) is not None:
        changes["max_delay"] = args.delay_us
    if getattr(args, "ratio", None) is not None:
        changes["split_ratio"] = args.ratio
    if getattr(args, "horizon", None) is not None:
        changes["horizon_years"] = args.horizon
    return inst.with_params(**changes) if changes else inst


def _options(args) -> SolveOptions:
    return SolveOptions(
        mode=Mode(args.mode),
        time_limit=args.time_limit,
        gap_tolerance=args.gap,
        seed=args.seed,
        node_limit=args.node_limit,
    )


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_validate(args) -> int:
    inst = _instance(args.instance, check=False)
    issues = feasibility_issues(inst, compute_distances(inst))
    if issues:
        for msg in issues:
            print(f"infeasible: {msg}", file=sys.stderr)
        return FAILED
    print(f"{inst.name}: {len(inst.cos)} CO, {len(inst.splitters)} splitter, {len(inst.rus)} RU/ONU sites; ok")
    return OK


def cmd_solve(args) -> int:
    inst = _scenario(_instance(args.instance, check=False), args)
    dm = compute_distances(inst)
    issues = feasibility_issues(inst, dm)
    if issues:
        for msg in issues:
            print(f"infeasible: {msg}", file=sys.stderr)
        return FAILED
    model = build_model(inst, dm)
    result = solve(model, _options(args))
    out = Path(args.out_dir)
    _write(out / "solve_result.json", dumps_canonical(result.to_dict()))
    _write(out / "incumbent_trace.csv", result.trace_csv())
    print(f"status: {result.status.value} ({result.message})")
    if result.plan is None:
        return FAILED
    save_plan(result.plan, out / "plan.json")
    report = total_cost(result.plan, inst, model)
    _write(out / "cost_report.json", dumps_canonical(report.to_dict()))
    _write(out / "cost_report.csv", report.to_csv())
    if args.svg:
        save_map(inst, result.plan, args.svg, RenderStyle(title=_title(inst)))
    print(f"TCO: {float(report.tco):.2f} (Capex {float(report.capex_total):.2f}, "
          f"Opex {float(report.opex_total):.2f}/yr over {report.horizon_years} years)")
    print(f"open COs: {len(result.plan.open_cos)}, open splitters: {len(result.plan.open_splitters)}")
    if result.status is Status.TIMED_OUT:
        print(f"warning: time limit reached, gap {result.gap:.3%}", file=sys.stderr)
    return OK


def _title(inst: PlanningInstance) -> str:
    return f"{inst.name}: {inst.params.max_delay:g} us, 1:{inst.params.split_ratio}"


def cmd_sweep(args) -> int:
    from .sweep import ScenarioGrid, run_sweep, trend_checks, verdicts_csv

    inst = _instance(args.instance, check=False)
    grid_kw = {}
    if args.grid_file:
        try:
            doc = json.loads(Path(args.grid_file).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read grid file: {exc}") from exc
        unknown = set(doc) - {"delay_thresholds", "split_ratios", "horizon_years"}
        if unknown:
            raise UsageError(f"unknown grid keys: {sorted(unknown)}")
        grid_kw = doc
    try:
        grid = ScenarioGrid(inst, **grid_kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad grid: {exc}") from exc

    def progress(cell):
        print(f"{cell.threshold_us:g} us 1:{cell.ratio}: {cell.status}"
              + (f" TCO {cell.tco:.2f}" if cell.tco is not None else f" ({cell.message})"), flush=True)

    report = run_sweep(grid, _options(args), workers=args.workers,
                       total_time_limit=args.total_time_limit, on_cell=progress)
    out = Path(args.out_dir)
    _write(out / "sweep.csv", report.to_csv())
    _write(out / "sweep.json", dumps_canonical({k: v for k, v in report.to_dict().items()}))
    verdicts = trend_checks(report)
    _write(out / "trends.csv", verdicts_csv(verdicts))
    for v in verdicts:
        print(f"trend {v.check} [{v.scope}]: {v.outcome}")
    if not args.no_plots:
        from .plotting import write_figures

        write_figures(report, out)
    return OK


def cmd_export_lp(args) -> int:
    inst = _scenario(_instance(args.instance, check=False), args)
    export_lp(build_model(inst), Path(args.out))
    return OK


def cmd_verify(args) -> int:
    inst = _instance(args.instance, check=False)
    plan = load_plan(args.plan)
    echo = plan.scenario
    if args.delay_us is None and "max_delay_us" in echo:
        args.delay_us = echo["max_delay_us"]
    if args.ratio is None and "split_ratio" in echo:
        args.ratio = echo["split_ratio"]
    if args.horizon is None and "horizon_years" in echo:
        args.horizon = echo["horizon_years"]
    inst = _scenario(inst, args)
    model = build_model(inst)
    verdict = verify_plan(plan, model)
    if not verdict.feasible:
        for v in verdict.violations:
            print(v.describe())
        print(f"{len(verdict.violations)} violation(s)", file=sys.stderr)
        return FAILED
    print(f"feasible; objective {float(verdict.objective):.2f}")
    return OK


def cmd_render(args) -> int:
    inst = _instance(args.instance, check=False)
    plan = load_plan(args.plan)
    save_map(inst, plan, args.out, RenderStyle(title=args.title))
    return OK


def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    config = config or {}
    parser = argparse.ArgumentParser(prog="ponplan", description="Delay-aware PON fronthaul planning")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(p):
        p.add_argument("--delay-us", type=float, help="override the path delay budget")
        p.add_argument("--ratio", type=int, help="override the splitter ratio")
        p.add_argument("--horizon", type=int, help="override the planning horizon in years")

    def solver_flags(p):
        p.add_argument("--time-limit", type=float, default=config.get("time_limit", 900.0))
        p.add_argument("--mode", choices=[m.value for m in Mode], default=config.get("mode", Mode.EXACT_BNB.value))
        p.add_argument("--seed", type=int, default=config.get("seed", 0))
        p.add_argument("--node-limit", type=int, default=config.get("node_limit", 1_000_000))
        p.add_argument("--gap", type=float, default=config.get("gap_tolerance", 0.0),
                       help="relative optimality gap accepted (0 proves optimality)")

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("instance")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve one scenario")
    p.add_argument("instance")
    scenario_flags(p)
    solver_flags(p)
    p.add_argument("--out-dir", default=config.get("out_dir", "."))
    p.add_argument("--svg", help="also render the plan to this SVG file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="solve a delay x ratio grid")
    p.add_argument("instance")
    p.add_argument("--grid-file", help="JSON with delay_thresholds, split_ratios, horizon_years")
    solver_flags(p)
    p.add_argument("--workers", type=int, default=config.get("workers", 1))
    p.add_argument("--total-time-limit", type=float, default=config.get("total_time_limit"))
    p.add_argument("--out-dir", default=config.get("out_dir", "."))
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-lp", help="write the model in CPLEX LP format")
    p.add_argument("instance")
    p.add_argument("out")
    scenario_flags(p)
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("verify", help="check a plan against an instance")
    p.add_argument("instance")
    p.add_argument("plan")
    scenario_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("render", help="draw a plan as SVG")
    p.add_argument("instance")
    p.add_argument("plan")
    p.add_argument("out")
    p.add_argument("--title")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        config = _load_config()
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    parser = build_parser(config)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except (InstanceError, InfeasiblePlanError, PlanStructureError, ModelSizeError, RenderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return INTERNAL


if __name__ == "__main__":
    sys.exit(main())
