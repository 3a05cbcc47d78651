"""Greedy tree approximation driven by the minimal-pair error functional.

The driver repeatedly bisects the leaf with the largest modified error

    q(root) = e(root),    q(child) = e(child) q(parent) / (e(child) + q(parent)),

which damps the priority of elements whose error does not decay under
refinement.  Conforming closure may bisect elements several times in one
step; nodes that are created and immediately bisected again still receive a
q value, computed from e on a conforming mesh in which they are leaves (e only
depends on the element and the refinement tags).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .approx import RDContext, global_best
from .localization import error_functional_e, global_functional_E
from .mesh import Mesh, bisect_conforming, uniform_refine
from .targets import Target

MAX_EXHAUSTIVE_BUDGET = 12
SUBADDITIVITY_FACTOR = 4.0  # 2 d for d = 2


@dataclass(frozen=True)
class TraceRow:
    step: int
    n_elements: int
    E: float
    global_error: float
    selected: int | None


@dataclass
class TreeResult:
    mesh: Mesh
    trace: list[TraceRow]
    e_evaluations: int
    subadditivity: list[tuple[int, float, float]] = field(default_factory=list)
    violations: list[tuple[int, float, float]] = field(default_factory=list)
    q: dict[int, float] = field(default_factory=dict)

    @property
    def E(self) -> float:
        return self.trace[-1].E

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "n_elements", "E", "global_error", "selected_element"])
        for r in self.trace:
            w.writerow([r.step, r.n_elements, repr(r.E), repr(r.global_error),
                        "" if r.selected is None else r.selected])
        return buf.getvalue()


def _modified(e: float, q_parent: float) -> float:
    if e + q_parent == 0.0:
        return 0.0
    return e * q_parent / (e + q_parent)


class _Evaluator:
    def __init__(self, u: Target, ctx: RDContext):
        self.u = u
        self.ctx = ctx
        self.values: dict[int, float] = {}
        self.count = 0

    def __call__(self, mesh: Mesh, eid: int) -> float:
        val = self.values.get(eid)
        if val is None:
            val = error_functional_e(self.u, mesh, eid, self.ctx)
            self.values[eid] = val
            self.count += 1
        return val


def tree_approximate(u: Target, root: Mesh, ctx: RDContext, budget: int,
                     track_global: bool = True, rtol: float = 1e-9) -> TreeResult:
    """Greedy bisection by maximal modified error until ``budget`` leaves."""
    if budget < len(root):
        raise ValueError(f"budget {budget} is below the root size {len(root)}")
    ev = _Evaluator(u, ctx)
    mesh = root
    master = mesh.master
    q = {eid: ev(mesh, eid) for eid in mesh.leaves}

    def row(step, selected):
        E = sum(ev(mesh, e) for e in mesh.leaves)
        g = global_best(u, mesh, ctx).error if track_global else math.nan
        return TraceRow(step, len(mesh), E, g, selected)

    trace = [row(0, None)]
    checks, violations = [], []
    step = 0
    while len(mesh) < budget:
        selected = max(mesh.leaves, key=lambda e: (q[e], -e))
        if q[selected] == 0.0:
            break
        new = bisect_conforming(mesh, selected)
        old_leaves = mesh.leaf_set
        created = sorted(set(new.leaves) - old_leaves)
        need = set()
        for c in created:
            x = c
            while x not in old_leaves:
                need.add(x)
                x = master.parent_id(x)
        carriers: dict[int, Mesh] = {}

        def carrier(x):
            if x in new.leaf_set:
                return new
            p = master.parent_id(x)
            if p not in carriers:
                base = mesh if p in old_leaves else carrier(p)
                carriers[p] = bisect_conforming(base, p)
            return carriers[p]

        for x in sorted(need):
            p = master.parent_id(x)
            q[x] = _modified(ev(carrier(x), x), q[p])
        for old in sorted(old_leaves - new.leaf_set):
            desc = [c for c in created if _descends(master, c, old)]
            total = sum(ev(new, c) for c in desc)
            bound = SUBADDITIVITY_FACTOR * ev(mesh, old)
            checks.append((old, total, bound))
            if total > bound + rtol * max(bound, 1e-300) + 1e-14:
                violations.append((old, total, bound))
        mesh = new
        step += 1
        trace.append(row(step, selected))
    return TreeResult(mesh, trace, ev.count, checks, violations,
                      {e: q[e] for e in mesh.leaves})


def _descends(master, eid: int, ancestor: int) -> bool:
    x = eid
    while x is not None:
        if x == ancestor:
            return True
        x = master.parent_id(x)
    return False


def enumerate_conforming(root: Mesh, budget: int) -> list[Mesh]:
    """All conforming meshes generated from ``root`` with at most ``budget`` elements."""
    if budget > MAX_EXHAUSTIVE_BUDGET:
        raise ValueError(f"exhaustive enumeration is limited to budget <= {MAX_EXHAUSTIVE_BUDGET}")
    seen = {root.leaves: root}
    stack = [root]
    while stack:
        mesh = stack.pop()
        for eid in mesh.leaves:
            new = bisect_conforming(mesh, eid)
            if len(new) <= budget and new.leaves not in seen:
                seen[new.leaves] = new
                stack.append(new)
    return [seen[k] for k in sorted(seen, key=lambda k: (len(k), k))]


@dataclass(frozen=True)
class ExhaustiveResult:
    mesh: Mesh
    E: float
    count: int


def exhaustive_best_tree(u: Target, root: Mesh, ctx: RDContext, budget: int) -> ExhaustiveResult:
    """Minimizer of E over every conforming mesh with at most ``budget`` elements."""
    meshes = enumerate_conforming(root, budget)
    best, best_E = None, math.inf
    for m in meshes:
        E = global_functional_E(u, m, ctx)
        if E < best_E:
            best, best_E = m, E
    return ExhaustiveResult(best, best_E, len(meshes))


def uniform_trace(u: Target, root: Mesh, ctx: RDContext, max_elements: int) -> list[TraceRow]:
    """E and global error along uniform refinement up to ``max_elements``."""
    rows = []
    mesh = root
    k = 0
    while True:
        rows.append(TraceRow(k, len(mesh), global_functional_E(u, mesh, ctx),
                             global_best(u, mesh, ctx).error, None))
        nxt = uniform_refine(mesh, 1)
        if len(nxt) > max_elements:
            return rows
        mesh = nxt
        k += 1
