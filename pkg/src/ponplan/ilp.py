"""Solver-independent ILP for fronthaul planning, LP-format export and plan verification."""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

from ._exact import exact
from .costs import HOURS_PER_YEAR, per_link_installation
from .model import DistanceMatrix, PlanningInstance, compute_distances
from .plan import DeploymentPlan

FAMILIES = (
    "eq13", "eq14", "eq15", "eq16", "eq17", "eq18", "eq19", "eq20",
    "eq22", "eq23", "eq24", "eq25", "eq26", "link", "fix",
)


class ModelSizeError(ValueError):
    pass


class PlanStructureError(ValueError):
    pass


class InfeasiblePlanError(ValueError):
    def __init__(self, verdict: Verdict):
        self.verdict = verdict
        lines = [v.describe() for v in verdict.violations[:20]]
        more = len(verdict.violations) - len(lines)
        if more > 0:
            lines.append(f"... and {more} more")
        super().__init__("plan violates constraints:\n  " + "\n  ".join(lines))


class VarKind(enum.IntEnum):
    X_IJ = 0  # CO i feeds splitter j
    X_JR = 1  # splitter j serves RU r
    C_I = 2  # CO i open
    S_J = 3  # splitter j open
    R_R = 4  # RU r deployed


_PREFIX = {
    VarKind.X_IJ: ("x", "c", "s"),
    VarKind.X_JR: ("x", "s", "r"),
    VarKind.C_I: ("C", "c"),
    VarKind.S_J: ("S", "s"),
    VarKind.R_R: ("R", "r"),
}


@dataclass(frozen=True, order=True)
class VariableId:
    kind: VarKind
    indices: tuple[int, ...]

    @property
    def name(self) -> str:
        head, *tags = _PREFIX[self.kind]
        return head + "".join(f"_{t}{i}" for t, i in zip(tags, self.indices))


class Sense(str, enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    tag: str
    terms: tuple[tuple[VariableId, Fraction], ...]
    sense: Sense
    rhs: Fraction

    def lhs(self, active: set[VariableId]) -> Fraction:
        return sum((c for v, c in self.terms if v in active), Fraction(0))

    def slack(self, lhs: Fraction) -> Fraction:
        if self.sense is Sense.LE:
            return self.rhs - lhs
        if self.sense is Sense.GE:
            return lhs - self.rhs
        return -abs(lhs - self.rhs)


@dataclass(frozen=True)
class IlpModel:
    variables: tuple[VariableId, ...]
    objective: tuple[tuple[VariableId, Fraction], ...]
    objective_constant: Fraction
    constraints: tuple[LinearConstraint, ...]
    instance: PlanningInstance | None = None
    distances: DistanceMatrix | None = None
    metadata: Mapping[str, Any] = field(default_factory=dict)

    @cached_property
    def index(self) -> dict[VariableId, int]:
        return {v: k for k, v in enumerate(self.variables)}

    @cached_property
    def cost_of(self) -> dict[VariableId, Fraction]:
        return dict(self.objective)

    def families(self) -> set[str]:
        return {c.tag for c in self.constraints}

    def problems(self) -> list[str]:
        errs = []
        used = {v for c in self.constraints for v, _ in c.terms}
        for v in self.variables:
            if v not in used:
                errs.append(f"variable {v.name} appears in no constraint")
        for v, c in self.objective:
            if c < 0:
                errs.append(f"negative objective coefficient on {v.name}")
        for c in self.constraints:
            if c.tag not in FAMILIES:
                errs.append(f"constraint {c.name} has unknown tag {c.tag}")
            ids = [v for v, _ in c.terms]
            if len(ids) != len(set(ids)):
                errs.append(f"constraint {c.name} repeats a variable")
        return errs

    def evaluate(self, active: set[VariableId]) -> Fraction:
        return self.objective_constant + sum(
            (c for v, c in self.objective if v in active), Fraction(0)
        )


@dataclass(frozen=True)
class UnitCoefficients:
    """Per-unit objective weights: Capex plus horizon-weighted Opex."""

    co: Fraction
    feeder_fixed: Fraction
    per_km: Fraction
    splitter: Fraction
    distribution_fixed: Fraction
    ru: Fraction
    constant: Fraction


def unit_coefficients(inst: PlanningInstance) -> UnitCoefficients:
    c, p = inst.costs, inst.params
    years = p.horizon_years
    om = exact(c.om_fraction)
    equip_w = 1 + years * om
    # fiber and installation only carry O&M when it is charged on total Capex
    other_w = equip_w if c.om_basis == "capex" else Fraction(1)
    kwh_year = exact(c.electricity_price) * HOURS_PER_YEAR / 1000
    install = per_link_installation(c)
    return UnitCoefficients(
        co=exact(c.co_housing) * equip_w,
        feeder_fixed=(exact(c.do_unit) + exact(c.awg)) * equip_w
        + years * kwh_year * (exact(c.power_do) + exact(c.power_cooling))
        + install * other_w,
        per_km=1000 * exact(c.fiber_per_m) * other_w,
        splitter=c.splitter_price(p.split_ratio) * equip_w,
        distribution_fixed=install * other_w,
        ru=exact(c.ru_onu) * equip_w + years * (kwh_year * exact(c.power_ru_onu) + exact(c.yearly_site_rent)),
        constant=years * exact(c.software_license),
    )


def build_model(
    inst: PlanningInstance,
    dm: DistanceMatrix | None = None,
    *,
    max_variables: int = 200_000,
    drop_families: Iterable[str] = (),
) -> IlpModel:
    """Build the planning ILP. ``drop_families`` removes constraint families (for relaxation studies)."""
    dm = dm if dm is not None else compute_distances(inst)
    m, n, p = len(inst.cos), len(inst.splitters), len(inst.rus)
    n_vars = m * n + n * p + m + n + p
    if n_vars > max_variables:
        raise ModelSizeError(
            f"{n_vars} variables ({m} COs x {n} splitters x {p} RUs) exceed the budget of {max_variables}"
        )
    drop = set(drop_families)
    unknown = drop - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown constraint families {sorted(unknown)}")
    prm = inst.params
    w = unit_coefficients(inst)

    X = {(i, j): VariableId(VarKind.X_IJ, (i, j)) for i in range(m) for j in range(n)}
    Y = {(j, r): VariableId(VarKind.X_JR, (j, r)) for j in range(n) for r in range(p)}
    C = [VariableId(VarKind.C_I, (i,)) for i in range(m)]
    S = [VariableId(VarKind.S_J, (j,)) for j in range(n)]
    R = [VariableId(VarKind.R_R, (r,)) for r in range(p)]
    variables = tuple(list(X.values()) + list(Y.values()) + C + S + R)

    feeder = [[dm.feeder(i, j) for j in range(n)] for i in range(m)]
    dist = [[dm.distribution(j, r) for r in range(p)] for j in range(n)]

    objective = (
        [(X[i, j], w.feeder_fixed + w.per_km * feeder[i][j]) for i in range(m) for j in range(n)]
        + [(Y[j, r], w.distribution_fixed + w.per_km * dist[j][r]) for j in range(n) for r in range(p)]
        + [(v, w.co) for v in C]
        + [(v, w.splitter) for v in S]
        + [(v, w.ru) for v in R]
    )

    tau, tau_max = exact(prm.delay_per_km), exact(prm.max_delay)
    d1_max, d_max = exact(prm.max_distribution_fiber), exact(prm.max_total_distance)
    max_feeder = max((max(row) for row in feeder), default=Fraction(0))
    max_dist = max((max(row) for row in dist), default=Fraction(0))
    big_m_delay = tau * (max_feeder + max_dist)
    big_m_dist = max_feeder + max_dist
    ratio = prm.split_ratio
    one, zero = Fraction(1), Fraction(0)

    rows: list[LinearConstraint] = []

    def add(tag, name, terms, sense, rhs):
        if tag not in drop:
            rows.append(LinearConstraint(name, tag, tuple(terms), sense, exact(rhs)))

    for r in range(p):
        add("eq13", f"eq13_r{r}", [(Y[j, r], one) for j in range(n)], Sense.EQ, 1)
    for j in range(n):
        add("eq14", f"eq14_s{j}", [(Y[j, r], one) for r in range(p)], Sense.LE, ratio)
    for j in range(n):
        for r in range(p):
            add("eq15", f"eq15_s{j}_r{r}", [(Y[j, r], one), (S[j], -one)], Sense.LE, 0)
    for j in range(n):
        add("eq16", f"eq16_s{j}", [(Y[j, r], one) for r in range(p)] + [(S[j], -one)], Sense.GE, 0)
    for j in range(n):
        add("eq17", f"eq17_s{j}", [(X[i, j], one) for i in range(m)] + [(S[j], -one)], Sense.EQ, 0)
    for i in range(m):
        add("eq18", f"eq18_c{i}", [(X[i, j], one) for j in range(n)] + [(C[i], -exact(prm.max_dos_per_co))],
            Sense.LE, 0)
    for i in range(m):
        for j in range(n):
            add("eq19", f"eq19_c{i}_s{j}", [(X[i, j], one)] + [(Y[j, r], -one) for r in range(p)], Sense.LE, 0)
    add("eq20", "eq20", [(v, one) for v in S] + [(X[i, j], -one) for i in range(m) for j in range(n)],
        Sense.EQ, 0)
    for tag, ru_rate, pon_rate in (
        ("eq22", prm.ru_downlink, prm.pon_downlink),
        ("eq23", prm.ru_uplink, prm.pon_uplink),
    ):
        for j in range(n):
            add(tag, f"{tag}_s{j}", [(Y[j, r], exact(ru_rate)) for r in range(p)], Sense.LE, exact(pon_rate))
    for i in range(m):
        for j in range(n):
            for r in range(p):
                add("eq24", f"eq24_c{i}_s{j}_r{r}",
                    [(X[i, j], tau * feeder[i][j] + big_m_delay), (Y[j, r], tau * dist[j][r] + big_m_delay)],
                    Sense.LE, tau_max + 2 * big_m_delay)
    if prm.d1_applies_to == "distribution":
        for j in range(n):
            for r in range(p):
                add("eq25", f"eq25_s{j}_r{r}", [(Y[j, r], dist[j][r])], Sense.LE, d1_max)
    else:
        for i in range(m):
            for j in range(n):
                add("eq25", f"eq25_c{i}_s{j}", [(X[i, j], feeder[i][j])], Sense.LE, d1_max)
    for i in range(m):
        for j in range(n):
            for r in range(p):
                add("eq26", f"eq26_c{i}_s{j}_r{r}",
                    [(X[i, j], feeder[i][j] + big_m_dist), (Y[j, r], dist[j][r] + big_m_dist)],
                    Sense.LE, d_max + 2 * big_m_dist)
    for i in range(m):
        for j in range(n):
            add("link", f"link_c{i}_s{j}", [(X[i, j], one), (C[i], -one)], Sense.LE, 0)
    for r in range(p):
        add("fix", f"fix_r{r}", [(R[r], one)], Sense.EQ, 1)

    metadata = {
        "instance": inst.name,
        "fingerprint": inst.fingerprint(),
        "params": {
            "split_ratio": prm.split_ratio,
            "splitter_capacity": prm.splitter_capacity(),
            "max_delay_us": prm.max_delay,
            "delay_per_km": prm.delay_per_km,
            "max_dos_per_co": prm.max_dos_per_co,
            "horizon_years": prm.horizon_years,
            "d1_applies_to": prm.d1_applies_to,
        },
        "big_m_delay": big_m_delay,
        "big_m_dist": big_m_dist,
        "dropped_families": sorted(drop),
        "notes": [
            "RU/ONU objective term priced with costs.ru_onu",
            "R_r fixed to 1: every listed RU/ONU is served",
        ],
    }
    return IlpModel(
        variables=variables,
        objective=tuple(objective),
        objective_constant=w.constant,
        constraints=tuple(rows),
        instance=inst,
        distances=dm,
        metadata=metadata,
    )


# -- LP export -------------------------------------------------------------

_CONST_VAR = "ONE_VAR_CONSTANT"


def _num(value: Fraction) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def _expr(terms: Sequence[tuple[str, Fraction]], per_line: int = 6) -> str:
    parts = []
    for k, (name, coef) in enumerate(terms):
        mag = _num(abs(coef))
        if k == 0:
            parts.append(f"{'-' if coef < 0 else ''}{mag} {name}")
        else:
            parts.append(f"{'-' if coef < 0 else '+'} {mag} {name}")
    lines = [" ".join(parts[k:k + per_line]) for k in range(0, len(parts), per_line)]
    return "\n   ".join(lines)


def export_lp(model: IlpModel, sink) -> None:
    """Write ``model`` in CPLEX LP text format to a path or a (text or byte) stream."""
    if not model.variables:
        raise ValueError("no variables")
    text = _lp_text(model)
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        with open(sink, "w") as fh:
            fh.write(text)
    elif isinstance(sink, io.TextIOBase):
        sink.write(text)
    else:
        sink.write(text.encode())


def _lp_text(model: IlpModel) -> str:
    order = sorted(model.variables)
    out = [f"\\ fronthaul planning model {model.metadata.get('fingerprint', '')}".rstrip(), "Minimize"]
    obj_terms = [(v.name, c) for v, c in sorted(model.objective)]
    if model.objective_constant:
        obj_terms.append((_CONST_VAR, model.objective_constant))
    out.append(" obj: " + (_expr(obj_terms) if obj_terms else "0 " + order[0].name))
    out.append("Subject To")
    sense = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}
    for row in model.constraints:
        terms = [(v.name, c) for v, c in row.terms]
        if not terms:
            continue
        out.append(f" {row.name}: {_expr(terms)} {sense[row.sense]} {_num(row.rhs)}")
    out.append("Bounds")
    if model.objective_constant:
        out.append(f" {_CONST_VAR} = 1")
    out.append("Binary")
    for k in range(0, len(order), 8):
        out.append(" " + " ".join(v.name for v in order[k:k + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


# -- plans <-> variables -----------------------------------------------------

def _site_maps(inst: PlanningInstance):
    return (
        {s.id: i for i, s in enumerate(inst.cos)},
        {s.id: j for j, s in enumerate(inst.splitters)},
        {s.id: r for r, s in enumerate(inst.rus)},
    )


def plan_to_active(plan: DeploymentPlan, model: IlpModel) -> set[VariableId]:
    inst = model.instance
    co_idx, sp_idx, ru_idx = _site_maps(inst)
    unknown = []
    unknown += [f"CO {c!r}" for c in sorted(plan.open_cos) if c not in co_idx]
    unknown += [f"splitter {s!r}" for s in sorted(plan.open_splitters) if s not in sp_idx]
    for ru, sp in sorted(plan.ru_assignment.items()):
        if ru not in ru_idx:
            unknown.append(f"RU {ru!r}")
        if sp not in sp_idx:
            unknown.append(f"splitter {sp!r}")
    for sp, co in sorted(plan.splitter_homing.items()):
        if sp not in sp_idx:
            unknown.append(f"splitter {sp!r}")
        if co not in co_idx:
            unknown.append(f"CO {co!r}")
    if unknown:
        raise PlanStructureError("plan references unknown sites: " + ", ".join(dict.fromkeys(unknown)))
    active = {VariableId(VarKind.C_I, (co_idx[c],)) for c in plan.open_cos}
    active |= {VariableId(VarKind.S_J, (sp_idx[s],)) for s in plan.open_splitters}
    active |= {VariableId(VarKind.R_R, (ru_idx[r],)) for r in plan.ru_assignment}
    active |= {VariableId(VarKind.X_JR, (sp_idx[s], ru_idx[r])) for r, s in plan.ru_assignment.items()}
    active |= {VariableId(VarKind.X_IJ, (co_idx[c], sp_idx[s])) for s, c in plan.splitter_homing.items()}
    return active


def active_to_plan(active: Iterable[VariableId], model: IlpModel, objective=None,
                   scenario: Mapping[str, Any] | None = None) -> DeploymentPlan:
    inst, dm = model.instance, model.distances
    active = set(active)
    open_cos, open_sp, assign, homing = set(), set(), {}, {}
    feeder = distribution = Fraction(0)
    for v in sorted(active):
        if v.kind is VarKind.C_I:
            open_cos.add(inst.cos[v.indices[0]].id)
        elif v.kind is VarKind.S_J:
            open_sp.add(inst.splitters[v.indices[0]].id)
        elif v.kind is VarKind.X_JR:
            j, r = v.indices
            assign[inst.rus[r].id] = inst.splitters[j].id
            distribution += dm.distribution(j, r)
        elif v.kind is VarKind.X_IJ:
            i, j = v.indices
            homing[inst.splitters[j].id] = inst.cos[i].id
            feeder += dm.feeder(i, j)
    if objective is None:
        objective = model.evaluate(active)
    return DeploymentPlan(
        open_cos=open_cos,
        open_splitters=open_sp,
        ru_assignment=assign,
        splitter_homing=homing,
        objective_value=float(objective),
        feeder_km=float(feeder),
        distribution_km=float(distribution),
        scenario=dict(scenario) if scenario is not None else scenario_echo(model),
    )


def scenario_echo(model: IlpModel) -> dict[str, Any]:
    prm = model.instance.params
    return {
        "instance": model.instance.name,
        "split_ratio": prm.split_ratio,
        "max_delay_us": prm.max_delay,
        "horizon_years": prm.horizon_years,
    }


# -- verification ------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    name: str
    tag: str
    lhs: Fraction
    rhs: Fraction
    sense: Sense
    slack: Fraction
    detail: str = ""

    def describe(self) -> str:
        text = f"{self.name} [{self.tag}]: {float(self.lhs):g} {self.sense.value} {float(self.rhs):g} " \
               f"(slack {float(self.slack):g})"
        return f"{text}; {self.detail}" if self.detail else text


@dataclass(frozen=True)
class Verdict:
    feasible: bool
    violations: tuple[Violation, ...]
    objective: Fraction

    def by_tag(self, tag: str) -> list[Violation]:
        return [v for v in self.violations if v.tag == tag]


def check_active(active: set[VariableId], model: IlpModel) -> list[Violation]:
    out = []
    meta = model.metadata
    for row in model.constraints:
        lhs = row.lhs(active)
        slack = row.slack(lhs)
        if slack < 0:
            detail = ""
            if row.tag == "eq24":
                detail = f"path delay {float(lhs - 2 * meta['big_m_delay']):g} us"
            elif row.tag == "eq26":
                detail = f"path length {float(lhs - 2 * meta['big_m_dist']):g} km"
            out.append(Violation(row.name, row.tag, lhs, row.rhs, row.sense, slack, detail))
    return out


def verify_plan(plan: DeploymentPlan, model: IlpModel) -> Verdict:
    """Check every constraint row against ``plan`` and recompute its objective exactly."""
    active = plan_to_active(plan, model)
    violations = check_active(active, model)
    return Verdict(not violations, tuple(violations), model.evaluate(active))
