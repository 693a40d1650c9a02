"""Best-first branch and bound over the planning ILP."""

from __future__ import annotations

import heapq
import logging
import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..ilp import IlpModel, VarKind, active_to_plan, check_active
from .relaxation import Relaxation
from .structure import Structure, analyze
from .types import Mode, SolveOptions, SolveResult, SolveStats, Status

log = logging.getLogger(__name__)

_INT_TOL = 1e-6
_REL_TOL = 1e-9


@dataclass
class PartialAssignment:
    """Committed decisions, by site index."""

    ru_to_splitter: dict[int, int] = field(default_factory=dict)
    splitter_to_co: dict[int, int] = field(default_factory=dict)


def lower_bound(model: IlpModel, partial: PartialAssignment | None = None,
                structure: Structure | None = None) -> Fraction | float:
    """Admissible bound on every completion of ``partial``.

    Committed units are charged in full. Each unassigned RU adds its
    cheapest admissible distribution link; fixed costs it might share with
    other RUs are left out, as is splitter capacity. Returns ``math.inf``
    when some unassigned RU has no admissible splitter at all.
    """
    st = structure if structure is not None else analyze(model)
    partial = partial if partial is not None else PartialAssignment()
    cost = st.cost
    if not st.assignment_structure:
        return st.constant + sum((cost[k] for k in range(len(cost)) if st.lb[k] > 0), Fraction(0))

    total = st.constant + sum((cost[st.rr[r]] for r in range(st.p) if st.lb[st.rr[r]] > 0), Fraction(0))

    served: dict[int, list[int]] = {}
    for r, j in partial.ru_to_splitter.items():
        served.setdefault(j, []).append(r)
        total += cost[st.xjr[j, r]]
    committed = set(served) | set(partial.splitter_to_co)
    open_cos = set(partial.splitter_to_co.values())

    for j in sorted(committed):
        total += cost[st.sj[j]]
        if j in partial.splitter_to_co:
            total += cost[st.xij[partial.splitter_to_co[j], j]]
        else:
            options = set(range(st.m))
            for r in served.get(j, ()):
                options &= set(st.compatible_cos(j, r))
            if not options:
                return math.inf
            total += min(cost[st.xij[i, j]] for i in options)
    total += sum((cost[st.ci[i]] for i in open_cos), Fraction(0))

    unassigned = [r for r in range(st.p) if r not in partial.ru_to_splitter]
    for r in unassigned:
        best = None
        for j in range(st.n):
            k = st.xjr[j, r]
            if st.ub[k] == 0:
                continue
            cos = st.compatible_cos(j, r)
            if j in partial.splitter_to_co:
                if partial.splitter_to_co[j] not in cos:
                    continue
            elif not cos:
                continue
            if best is None or cost[k] < best:
                best = cost[k]
        if best is None:
            return math.inf
        total += best
    if unassigned and not committed:
        total += min(
            cost[st.sj[j]] + min(cost[st.xij[i, j]] for i in range(st.m))
            for j in range(st.n)
        )
    if not open_cos and (unassigned or committed):
        total += min(cost[st.ci[i]] for i in range(st.m))
    return total


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    fixes: tuple[tuple[int, int], ...] = field(compare=False)
    depth: int = field(compare=False, default=0)


class BranchAndBound:
    def __init__(self, model: IlpModel, opts: SolveOptions):
        self.model = model
        self.opts = opts
        self.st = analyze(model)
        self.lp = Relaxation(model, self.st)
        self.stats = SolveStats()
        self.incumbent_active = None
        self.incumbent_exact: Fraction | None = None
        self.incumbent = math.inf
        self.rng = random.Random(opts.seed)
        nv = len(model.variables)
        perm = list(range(nv))
        self.rng.shuffle(perm)
        self.tiebreak = np.empty(nv)
        self.tiebreak[perm] = np.arange(nv) / max(nv, 1)
        kind = np.empty(nv, dtype=np.int64)
        for v, k in model.index.items():
            kind[k] = v.kind
        self.kind = kind
        self.col_var = {k: v for v, k in model.index.items()}
        self._t0 = 0.0

    # -- helpers ---------------------------------------------------------
    def _elapsed(self) -> float:
        return time.perf_counter() - self._t0

    def _bounds(self, fixes):
        lb, ub = self.st.lb.copy(), self.st.ub.copy()
        for col, val in fixes:
            lb[col] = ub[col] = val
        return lb, ub

    def _prune_level(self) -> float:
        if math.isinf(self.incumbent):
            return math.inf
        slack = max(self.opts.gap_tolerance * abs(self.incumbent), _REL_TOL * abs(self.incumbent))
        return self.incumbent - slack

    def _note_pruned(self, bound: float) -> None:
        # only pruning granted by gap_tolerance leaves optimality unproven
        if bound < self.incumbent - _REL_TOL * abs(self.incumbent):
            self.min_pruned = min(self.min_pruned, bound)

    def _offer(self, x: np.ndarray) -> bool:
        active_cols = np.flatnonzero(x > 0.5)
        active = {self.col_var[k] for k in active_cols}
        if check_active(active, self.model):
            return False
        value = self.model.evaluate(active)
        if self.incumbent_exact is None or value < self.incumbent_exact:
            self.incumbent_exact = value
            self.incumbent = float(value)
            self.incumbent_active = active
            self.stats.best_incumbent_trace.append((self._elapsed(), self.incumbent))
            log.debug("incumbent %.2f after %d nodes", self.incumbent, self.stats.nodes_explored)
        return True

    def _solve_lp(self, fixes):
        self.stats.lp_solves += 1
        return self.lp.solve(*self._bounds(fixes))

    def _partial(self, fixes) -> PartialAssignment:
        part = PartialAssignment()
        for col, val in fixes:
            if val != 1:
                continue
            v = self.col_var[col]
            if v.kind is VarKind.X_JR:
                part.ru_to_splitter[v.indices[1]] = v.indices[0]
            elif v.kind is VarKind.X_IJ:
                part.splitter_to_co[v.indices[1]] = v.indices[0]
        return part

    def _fractional(self, x: np.ndarray, fixed: set[int]) -> np.ndarray:
        frac = np.minimum(x, 1 - x)
        mask = frac > _INT_TOL
        if fixed:
            mask[list(fixed)] = False
        return np.flatnonzero(mask)

    def _branch_column(self, x: np.ndarray, cand: np.ndarray) -> int:
        # facilities first (CO, splitter, feeder link), most fractional wins
        for kind in (VarKind.C_I, VarKind.S_J, VarKind.X_IJ):
            group = cand[self.kind[cand] == kind]
            if group.size:
                score = np.abs(x[group] - 0.5) + 1e-9 * self.tiebreak[group]
                return int(group[np.argmin(score)])
        # then the RU whose fractional options differ most in cost (regret)
        st = self.st
        best_col, best_key = -1, None
        cand_set = set(cand.tolist())
        for r in range(st.p):
            cols = [int(st.xjr[j, r]) for j in range(st.n) if int(st.xjr[j, r]) in cand_set]
            if not cols:
                continue
            costs = sorted(st.cost_f[c] for c in cols)
            regret = costs[1] - costs[0] if len(costs) > 1 else costs[0]
            col = max(cols, key=lambda c: (x[c], -self.tiebreak[c]))
            key = (regret, -self.tiebreak[col])
            if best_key is None or key > best_key:
                best_col, best_key = col, key
        if best_col < 0:
            best_col = int(cand[0])
        return best_col

    def _dive(self, fixes, x) -> None:
        """Fix the most promising fractional variable to 1 until integral or stuck."""
        fixes = list(fixes)
        for _ in range(4 * (self.st.n + self.st.m) + self.st.p):
            if self._elapsed() > self.opts.time_limit:
                return
            fixed = {c for c, _ in fixes}
            cand = self._fractional(x, fixed)
            if cand.size == 0:
                self._offer(x)
                return
            order = {VarKind.C_I: 0, VarKind.S_J: 1, VarKind.X_IJ: 2, VarKind.X_JR: 3}
            col = max(cand.tolist(), key=lambda c: (-order[VarKind(self.kind[c])], x[c], -self.tiebreak[c]))
            fixes.append((col, 1))
            out = self._solve_lp(fixes)
            if not out.feasible or out.x is None or out.bound >= self._prune_level():
                return
            x = out.x

    # -- main loop -------------------------------------------------------
    def run(self) -> SolveResult:
        self._t0 = time.perf_counter()
        st = self.st
        if st.infeasible_reason:
            return self._finish(Status.INFEASIBLE, -math.inf, st.infeasible_reason)
        use_comb = st.assignment_structure
        heap: list[_Node] = []
        seq = 0
        heapq.heappush(heap, _Node(-math.inf, seq, ()))
        self.min_pruned = math.inf
        limit_hit = None
        root_done = False

        while heap:
            if self.stats.nodes_explored >= self.opts.node_limit:
                limit_hit = "node limit"
                break
            if self._elapsed() > self.opts.time_limit:
                limit_hit = "time limit"
                break
            node = heapq.heappop(heap)
            level = self._prune_level()
            if node.bound >= level:
                self._note_pruned(node.bound)
                continue
            self.stats.nodes_explored += 1

            if use_comb and node.fixes:
                comb = lower_bound(self.model, self._partial(node.fixes), st)
                if float(comb) >= level:
                    self._note_pruned(float(comb))
                    continue

            out = self._solve_lp(node.fixes)
            if not out.feasible:
                continue
            bound = max(out.bound, node.bound)
            if bound >= self._prune_level():
                self._note_pruned(bound)
                continue
            fixed = {c for c, _ in node.fixes}
            if out.x is None:
                # numerical trouble: branch on the first free column
                free = [k for k in range(len(st.cost_f)) if k not in fixed and st.lb[k] != st.ub[k]]
                if not free:
                    continue
                col = free[0]
            else:
                cand = self._fractional(out.x, fixed)
                if cand.size == 0:
                    if self._offer(out.x):
                        continue
                    # rounded LP point fails the exact rows: branch on the least integral column
                    free = [k for k in range(len(out.x)) if k not in fixed and st.lb[k] != st.ub[k]]
                    if not free:
                        continue
                    col = max(free, key=lambda k: min(out.x[k], 1 - out.x[k]))
                else:
                    if not root_done:
                        self._dive(node.fixes, out.x)
                    col = self._branch_column(out.x, cand)
            root_done = True
            for val in (1, 0):
                seq += 1
                heapq.heappush(heap, _Node(bound, seq, node.fixes + ((col, val),), node.depth + 1))

        open_bound = min((n.bound for n in heap), default=math.inf)
        global_bound = min(open_bound, self.min_pruned, self.incumbent)
        if limit_hit is not None:
            return self._finish(Status.TIMED_OUT, global_bound, f"stopped at {limit_hit}")
        if self.incumbent_active is None:
            return self._finish(Status.INFEASIBLE, math.inf, diagnose_infeasibility(self.model, st))
        gap = _gap(self.incumbent, global_bound)
        if gap <= _REL_TOL:
            return self._finish(Status.OPTIMAL, self.incumbent, "proven optimal")
        return self._finish(Status.FEASIBLE, global_bound, f"within gap tolerance ({gap:.3g})")

    def _finish(self, status: Status, bound: float, message: str) -> SolveResult:
        self.stats.wall_time = self._elapsed()
        plan = None
        if self.incumbent_active is not None:
            plan = active_to_plan(self.incumbent_active, self.model, self.incumbent_exact)
        gap = _gap(self.incumbent, bound) if plan is not None else math.nan
        if status is Status.OPTIMAL:
            bound, gap = self.incumbent, 0.0
        return SolveResult(status, plan, bound, self.stats, gap, message)


def _gap(incumbent: float, bound: float) -> float:
    if math.isinf(incumbent):
        return math.inf
    if bound >= incumbent:
        return 0.0
    return (incumbent - bound) / max(abs(incumbent), 1e-12)


def diagnose_infeasibility(model: IlpModel, st: Structure | None = None) -> str:
    st = st if st is not None else analyze(model)
    if st.infeasible_reason:
        return st.infeasible_reason
    inst = model.instance
    if st.assignment_structure:
        for r in range(st.p):
            if not any(st.ub[st.xjr[j, r]] > 0 and st.compatible_cos(j, r) for j in range(st.n)):
                return f"RU/ONU {inst.rus[r].id!r} has no feasible (splitter, CO) pair"
    cap = inst.params.splitter_capacity()
    if cap * st.n < st.p:
        return f"{st.n} splitter sites of capacity {cap} cannot host {st.p} RU/ONUs"
    if inst.params.max_dos_per_co * st.m * cap < st.p:
        return "CO capacity (max_dos_per_co) cannot host every RU/ONU"
    return "no assignment satisfies capacity (eq14, eq22, eq23) and CO limits (eq18) together"


def solve(model: IlpModel, opts: SolveOptions | None = None) -> SolveResult:
    opts = opts if opts is not None else SolveOptions()
    if opts.mode is Mode.BRUTE_FORCE:
        from .brute import brute_force

        return brute_force(model, opts.size_guard)
    return BranchAndBound(model, opts).run()
