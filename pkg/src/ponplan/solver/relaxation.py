"""Strengthened LP relaxation solved with HiGHS through scipy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..ilp import Sense, VarKind
from .structure import Structure

_CAPACITY_TAGS = ("eq14", "eq22", "eq23")


@dataclass
class LpOutcome:
    feasible: bool
    x: np.ndarray | None = None
    bound: float = np.inf
    ok: bool = True  # False when HiGHS stopped for a numerical reason


class Relaxation:
    def __init__(self, model, st: Structure):
        self.st = st
        idx = model.index
        ub_rows: list[tuple[list[int], list[float], float]] = []
        eq_rows: list[tuple[list[int], list[float], float]] = []

        strengthen = "eq15" in st.families
        for row in st.wide_rows:
            cols = [idx[v] for v, _ in row.terms]
            vals = [float(c) for _, c in row.terms]
            rhs = float(row.rhs)
            if (
                strengthen and row.tag in _CAPACITY_TAGS and row.sense is Sense.LE and rhs >= 0
                and all(v.kind is VarKind.X_JR for v, _ in row.terms)
                and len({v.indices[0] for v, _ in row.terms}) == 1
            ):
                j = row.terms[0][0].indices[0]
                cols.append(int(st.sj[j]))
                vals.append(-rhs)
                rhs = 0.0
            if row.sense is Sense.EQ:
                eq_rows.append((cols, vals, rhs))
            elif row.sense is Sense.LE:
                ub_rows.append((cols, vals, rhs))
            else:
                ub_rows.append((cols, [-v for v in vals], -rhs))

        for a, b, combo in st.pair_cuts:
            ub_rows.append(_pair_cut(a, b, combo))

        for j in range(st.n):
            for r in range(st.p):
                bad = st.incompatible[j][r]
                if not bad:
                    continue
                y = int(st.xjr[j, r])
                if st.assignment_structure:
                    ok = [int(st.xij[i, j]) for i in range(st.m) if i not in bad]
                    ub_rows.append(([y] + ok, [1.0] + [-1.0] * len(ok), 0.0))
                else:
                    for i in sorted(bad):
                        ub_rows.append(_pair_cut(int(st.xij[i, j]), y, (1, 1)))

        nv = len(st.cost_f)
        self.c = st.cost_f
        self.A_ub, self.b_ub = _stack(ub_rows, nv)
        self.A_eq, self.b_eq = _stack(eq_rows, nv)
        self.constant = float(st.constant)

    def solve(self, lb: np.ndarray, ub: np.ndarray) -> LpOutcome:
        res = linprog(
            self.c,
            A_ub=self.A_ub if self.A_ub.shape[0] else None,
            b_ub=self.b_ub if self.A_ub.shape[0] else None,
            A_eq=self.A_eq if self.A_eq.shape[0] else None,
            b_eq=self.b_eq if self.A_eq.shape[0] else None,
            bounds=np.column_stack([lb, ub]),
            method="highs",
        )
        if res.status == 2:
            return LpOutcome(False)
        if res.status != 0 or res.x is None:
            return LpOutcome(True, None, -np.inf, ok=False)
        return LpOutcome(True, np.clip(res.x, lb, ub), self._safe_bound(res, lb, ub))

    def _safe_bound(self, res, lb, ub) -> float:
        # weak duality with any y_ub <= 0 gives a bound immune to LP round-off
        reduced = self.c.copy()
        bound = self.constant
        if self.A_ub.shape[0]:
            y = np.minimum(res.ineqlin.marginals, 0.0)
            reduced -= self.A_ub.T @ y
            bound += float(self.b_ub @ y)
        if self.A_eq.shape[0]:
            y = res.eqlin.marginals
            reduced -= self.A_eq.T @ y
            bound += float(self.b_eq @ y)
        bound += float(np.sum(np.where(reduced >= 0, reduced * lb, reduced * ub)))
        return min(bound, float(res.fun) + self.constant)


def _pair_cut(a: int, b: int, combo: tuple[int, int]) -> tuple[list[int], list[float], float]:
    if combo == (1, 1):
        return [a, b], [1.0, 1.0], 1.0
    if combo == (1, 0):
        return [a, b], [1.0, -1.0], 0.0
    if combo == (0, 1):
        return [a, b], [-1.0, 1.0], 0.0
    return [a, b], [-1.0, -1.0], -1.0


def _stack(rows, nv: int):
    if not rows:
        return sp.csr_matrix((0, nv)), np.zeros(0)
    data, indices, indptr, rhs = [], [], [0], []
    for cols, vals, b in rows:
        indices.extend(cols)
        data.extend(vals)
        indptr.append(len(indices))
        rhs.append(b)
    A = sp.csr_matrix((data, indices, indptr), shape=(len(rows), nv))
    A.sum_duplicates()
    return A, np.array(rhs, dtype=float)
