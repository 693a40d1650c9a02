"""Read the assignment structure back out of an IlpModel.

Rows on one or two binaries are decided exactly (all 0/1 combinations are
checked in rational arithmetic) and turned into bound fixings and conflict
pairs. Everything downstream (LP relaxation, combinatorial bound) works
from this digest, so it honours whatever families the model carries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..ilp import IlpModel, LinearConstraint, Sense, VarKind


def _satisfied(row: LinearConstraint, values) -> bool:
    lhs = sum((c * x for (_, c), x in zip(row.terms, values)), Fraction(0))
    if row.sense is Sense.LE:
        return lhs <= row.rhs
    if row.sense is Sense.GE:
        return lhs >= row.rhs
    return lhs == row.rhs


@dataclass
class Structure:
    m: int
    n: int
    p: int
    xij: np.ndarray  # column of x_ij
    xjr: np.ndarray  # column of x_jr
    ci: np.ndarray
    sj: np.ndarray
    rr: np.ndarray
    cost: list[Fraction]
    cost_f: np.ndarray
    constant: Fraction
    families: set[str]
    lb: np.ndarray  # bounds implied by single-variable rows
    ub: np.ndarray
    # forbidden (col_a, col_b) patterns from two-variable rows
    pair_cuts: list[tuple[int, int, tuple[int, int]]] = field(default_factory=list)
    # incompatible[j][r] = CO indices that cannot feed j while j serves r
    incompatible: list[list[set[int]]] = field(default_factory=list)
    wide_rows: list[LinearConstraint] = field(default_factory=list)
    infeasible_reason: str | None = None

    @property
    def assignment_structure(self) -> bool:
        """Whether open splitters home to exactly one CO and links imply openings."""
        return {"eq13", "eq15", "eq17", "link", "fix"} <= self.families

    def compatible_cos(self, j: int, r: int) -> list[int]:
        bad = self.incompatible[j][r]
        return [i for i in range(self.m) if i not in bad and self.ub[self.xij[i, j]] > 0]


def analyze(model: IlpModel) -> Structure:
    inst = model.instance
    m, n, p = len(inst.cos), len(inst.splitters), len(inst.rus)
    idx = model.index
    xij = np.full((m, n), -1, dtype=np.int64)
    xjr = np.full((n, p), -1, dtype=np.int64)
    ci = np.full(m, -1, dtype=np.int64)
    sj = np.full(n, -1, dtype=np.int64)
    rr = np.full(p, -1, dtype=np.int64)
    for v, k in idx.items():
        if v.kind is VarKind.X_IJ:
            xij[v.indices] = k
        elif v.kind is VarKind.X_JR:
            xjr[v.indices] = k
        elif v.kind is VarKind.C_I:
            ci[v.indices[0]] = k
        elif v.kind is VarKind.S_J:
            sj[v.indices[0]] = k
        else:
            rr[v.indices[0]] = k
    nv = len(model.variables)
    cost = [Fraction(0)] * nv
    for v, c in model.objective:
        cost[idx[v]] = c
    st = Structure(
        m=m, n=n, p=p, xij=xij, xjr=xjr, ci=ci, sj=sj, rr=rr,
        cost=cost, cost_f=np.array([float(c) for c in cost]),
        constant=model.objective_constant,
        families=model.families(),
        lb=np.zeros(nv), ub=np.ones(nv),
        incompatible=[[set() for _ in range(p)] for _ in range(n)],
    )
    kind_of = {k: v for v, k in idx.items()}
    pending: list[tuple[int, int, set[tuple[int, int]]]] = []
    for row in model.constraints:
        k = len(row.terms)
        if k == 0:
            if not _satisfied(row, ()):
                st.infeasible_reason = f"constraint {row.name} cannot be satisfied"
        elif k == 1:
            col = idx[row.terms[0][0]]
            ok = [x for x in (0, 1) if _satisfied(row, (x,))]
            if not ok:
                st.infeasible_reason = f"constraint {row.name} cannot be satisfied"
            elif ok == [0]:
                st.ub[col] = 0
            elif ok == [1]:
                st.lb[col] = 1
        elif k == 2:
            a, b = idx[row.terms[0][0]], idx[row.terms[1][0]]
            bad = {combo for combo in itertools.product((0, 1), repeat=2) if not _satisfied(row, combo)}
            if bad:
                pending.append((a, b, bad))
        else:
            st.wide_rows.append(row)

    # project two-variable rows onto single-variable fixings first
    for a, b, bad in pending:
        for col, pos in ((a, 0), (b, 1)):
            for val in (0, 1):
                if all(combo in bad for combo in itertools.product((0, 1), repeat=2) if combo[pos] == val):
                    if val == 1:
                        st.ub[col] = 0
                    else:
                        st.lb[col] = 1
    if np.any(st.lb > st.ub):
        st.infeasible_reason = st.infeasible_reason or "contradictory variable fixings"

    for a, b, bad in pending:
        for combo in sorted(bad):
            if not (st.lb[a] <= combo[0] <= st.ub[a] and st.lb[b] <= combo[1] <= st.ub[b]):
                continue
            va, vb = kind_of[a], kind_of[b]
            if combo == (1, 1) and {va.kind, vb.kind} == {VarKind.X_IJ, VarKind.X_JR}:
                x_ij, x_jr = (va, vb) if va.kind is VarKind.X_IJ else (vb, va)
                if x_ij.indices[1] == x_jr.indices[0]:
                    st.incompatible[x_jr.indices[0]][x_jr.indices[1]].add(x_ij.indices[0])
                    continue
            st.pair_cuts.append((a, b, combo))
    return st
