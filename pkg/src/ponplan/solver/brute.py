"""Exhaustive oracle: enumerate every (assignment, homing) configuration.

It relies on nothing but the model rows and objective, so it stays an
independent check on the branch-and-bound engine.
"""

from __future__ import annotations

import itertools
import math
import time

import numpy as np

from ..ilp import IlpModel, Sense, VariableId, VarKind, active_to_plan, check_active
from .bnb import PartialAssignment
from .types import SolveResult, SolveStats, Status


class OracleSizeError(ValueError):
    pass


def configuration_count(model: IlpModel, partial: PartialAssignment | None = None) -> int:
    inst = model.instance
    m, n, p = len(inst.cos), len(inst.splitters), len(inst.rus)
    partial = partial or PartialAssignment()
    free_ru = p - len(partial.ru_to_splitter)
    # every used splitter picks a CO; bound with all splitters used
    return n**free_ru * m ** min(n, p)


def _configurations(model: IlpModel, partial: PartialAssignment):
    inst = model.instance
    m, n, p = len(inst.cos), len(inst.splitters), len(inst.rus)
    choices = [
        [partial.ru_to_splitter[r]] if r in partial.ru_to_splitter else list(range(n))
        for r in range(p)
    ]
    for assign in itertools.product(*choices):
        used = sorted(set(assign))
        homing_choices = [
            [partial.splitter_to_co[j]] if j in partial.splitter_to_co else list(range(m)) for j in used
        ]
        if any(j not in used for j in partial.splitter_to_co):
            continue
        for homes in itertools.product(*homing_choices):
            active = [VariableId(VarKind.R_R, (r,)) for r in range(p)]
            active += [VariableId(VarKind.X_JR, (j, r)) for r, j in enumerate(assign)]
            active += [VariableId(VarKind.S_J, (j,)) for j in used]
            active += [VariableId(VarKind.X_IJ, (i, j)) for j, i in zip(used, homes)]
            active += [VariableId(VarKind.C_I, (i,)) for i in sorted(set(homes))]
            yield active


def brute_force(model: IlpModel, size_guard: int = 2_000_000,
                partial: PartialAssignment | None = None) -> SolveResult:
    """Provably optimal plan by full enumeration, restricted to completions of ``partial``."""
    t0 = time.perf_counter()
    partial = partial or PartialAssignment()
    estimate = configuration_count(model, partial)
    if estimate > size_guard:
        raise OracleSizeError(f"about {estimate} configurations exceed the size guard of {size_guard}")

    idx = model.index
    nv = len(model.variables)
    rows = model.constraints
    A = np.zeros((len(rows), nv))
    rhs = np.zeros(len(rows))
    sense = np.zeros(len(rows), dtype=np.int8)  # -1 <=, 0 =, 1 >=
    for k, row in enumerate(rows):
        for v, c in row.terms:
            A[k, idx[v]] += float(c)
        rhs[k] = float(row.rhs)
        sense[k] = {Sense.LE: -1, Sense.EQ: 0, Sense.GE: 1}[row.sense]
    tol = 1e-7 * (1 + np.abs(rhs) + np.abs(A).sum(axis=1))
    c = np.zeros(nv)
    for v, coef in model.objective:
        c[idx[v]] = float(coef)

    configs = list(_configurations(model, partial))
    stats = SolveStats(nodes_explored=len(configs))
    if not configs:
        stats.wall_time = time.perf_counter() - t0
        return SolveResult(Status.INFEASIBLE, None, math.inf, stats, math.nan, "no configurations")
    X = np.zeros((len(configs), nv))
    for k, active in enumerate(configs):
        X[k, [idx[v] for v in active]] = 1.0
    feasible = np.ones(len(configs), dtype=bool)
    for start in range(0, len(configs), 20000):
        chunk = X[start:start + 20000]
        lhs = chunk @ A.T
        diff = lhs - rhs
        ok = np.where(sense == -1, diff <= tol, np.where(sense == 1, diff >= -tol, np.abs(diff) <= tol))
        feasible[start:start + 20000] = ok.all(axis=1)
    objective = X @ c + float(model.objective_constant)

    best_key = best_active = best_value = None
    for k in sorted(np.flatnonzero(feasible), key=lambda k: (objective[k], k)):
        if best_value is not None and objective[k] > float(best_value) + 1e-6 * (1 + abs(float(best_value))):
            break
        active = set(configs[k])
        if check_active(active, model):
            continue
        value = model.evaluate(active)
        key = (value, sorted((v.kind, v.indices) for v in active))
        if best_key is None or key < best_key:
            best_key, best_active, best_value = key, active, value
    stats.wall_time = time.perf_counter() - t0
    if best_active is None:
        return SolveResult(Status.INFEASIBLE, None, math.inf, stats, math.nan, "exhaustive search found no feasible plan")
    plan = active_to_plan(best_active, model, best_value)
    stats.best_incumbent_trace.append((stats.wall_time, plan.objective_value))
    return SolveResult(Status.OPTIMAL, plan, plan.objective_value, stats, 0.0, "exhaustive enumeration")
