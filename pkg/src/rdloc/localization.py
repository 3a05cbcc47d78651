"""Localized best errors and the reports comparing them with the global one.

All sums are accumulated in ascending face-index / element-id order, so
reports are bit-reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import element, geometry
from .approx import (RDContext, best_on_element, best_on_patch, clamp_error_sq, global_best,
                     local_matrices, triangle_data)
from .errors import BoundaryTraceError
from .mesh import Mesh, mesh_stats, minimal_pair, pair
from .targets import Target

# A global squared error this small relative to |||u|||^2 counts as exact.
EXACT_RTOL = 1e-20
DIRICHLET_TOL = 1e-8
EXACT = "exact"


def _ratio(num: float, den: float, scale: float):
    if den * den <= EXACT_RTOL * max(scale, 1e-300):
        return EXACT
    return num / den


@dataclass
class LocalizationReport:
    epsilon: float
    degree: int
    bc: str
    global_error: float
    norm: float
    element_sum: float
    pair_sum: float
    minimal_pair_sum: float | None = None
    jump_augmented_sum: float | None = None
    trace_augmented_sum: float | None = None
    # Dirichlet mode: pair sum with the zero-trace space on every pair.
    pair_sum_zero: float | None = None
    element_errors: dict[int, float] = field(default_factory=dict)
    pair_errors: dict[tuple, float] = field(default_factory=dict)
    minimal_pair_errors: dict[tuple, float] = field(default_factory=dict)
    jump_terms: dict[tuple, float] = field(default_factory=dict)
    trace_terms: dict[int, float] = field(default_factory=dict)
    mesh_hash: str = ""
    target: str = ""
    stats: dict = field(default_factory=dict)

    def ratio(self, name: str):
        value = getattr(self, name)
        if value is None:
            return None
        return _ratio(value, self.global_error, self.norm**2)

    @property
    def ratios(self) -> dict:
        names = ["element_sum", "pair_sum", "minimal_pair_sum", "jump_augmented_sum",
                 "trace_augmented_sum", "pair_sum_zero"]
        return {n: self.ratio(n) for n in names if getattr(self, n) is not None}

    def covering_ok(self, slack: float = 1e-9) -> dict[str, bool]:
        """The exact covering inequalities (overlap 3 for pairs, 2 for minimal pairs)."""
        g2 = self.global_error**2
        tol = slack * max(self.norm**2, 1.0)
        out = {"pair": self.pair_sum**2 <= 3.0 * g2 + tol}
        if self.minimal_pair_sum is not None:
            out["minimal_pair"] = self.minimal_pair_sum**2 <= 2.0 * g2 + tol
        return out

    def summary(self) -> dict:
        return {
            "epsilon": self.epsilon, "degree": self.degree, "bc": self.bc,
            "target": self.target, "mesh_hash": self.mesh_hash,
            "global_error": self.global_error, "element_sum": self.element_sum,
            "pair_sum": self.pair_sum, "minimal_pair_sum": self.minimal_pair_sum,
            "jump_augmented_sum": self.jump_augmented_sum,
            "trace_augmented_sum": self.trace_augmented_sum,
            "pair_sum_zero": self.pair_sum_zero,
            "ratios": self.ratios, "covering": self.covering_ok(), "mesh_stats": self.stats,
        }

    def rows(self) -> list[dict]:
        """One row per local quantity: id, kind, epsilon, squared value."""
        base = {"epsilon": self.epsilon, "degree": self.degree, "mesh_hash": self.mesh_hash,
                "target": self.target}
        out = []
        tables = [("element", self.element_errors), ("pair", self.pair_errors),
                  ("minimal-pair", self.minimal_pair_errors), ("jump", self.jump_terms),
                  ("trace", self.trace_terms)]
        for kind, table in tables:
            for key, val in table.items():
                ident = key if isinstance(key, int) else f"{key[0]}-{key[1]}"
                out.append({**base, "id": ident, "kind": kind, "value_sq": repr(float(val))})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = ["id", "kind", "epsilon", "degree", "mesh_hash", "target", "value_sq"]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"schema": 1, **self.summary()}, indent=2, sort_keys=True)


def _sqrt_sum(values) -> float:
    total = 0.0
    for v in values:
        total += v
    return math.sqrt(total)


def element_errors(u: Target, mesh: Mesh, ctx: RDContext) -> dict[int, float]:
    return {eid: best_on_element(u, mesh.coords(eid), ctx).error_sq for eid in mesh.leaves}


def pair_errors(u: Target, mesh: Mesh, ctx: RDContext, bc: str | None = None) -> dict[tuple, float]:
    return {f: best_on_patch(u, pair(mesh, f), ctx, bc).error_sq for f in mesh.interior_faces}


# ---------------------------------------------------------------------------
# minimal pairs and the tree error functional

_mp_lock = threading.Lock()


def minimal_pair_error(u: Target, mesh: Mesh, face, ctx: RDContext) -> float:
    """Best error squared on the minimal pair of ``face`` (cached by geometry)."""
    patch = minimal_pair(mesh, face)
    key = ("mp", patch.point_set_key(), patch.boundary_edges, patch.boundary_vertices,
           ctx.epsilon, ctx.degree, ctx.bc)
    hit = u._cache.get(key)
    if hit is None:
        hit = best_on_patch(u, patch, ctx).error_sq
        with _mp_lock:
            u._cache[key] = hit
    return hit


def minimal_pair_errors(u: Target, mesh: Mesh, ctx: RDContext) -> dict[tuple, float]:
    return {f: minimal_pair_error(u, mesh, f, ctx) for f in mesh.face_list}


def error_functional_e(u: Target, mesh: Mesh, element_id: int, ctx: RDContext) -> float:
    """e(K): sum of the minimal-pair best errors squared over the faces of K."""
    el = mesh.element(element_id)
    if element_id not in mesh.leaf_set:
        raise ValueError(f"element {element_id} is not a leaf")
    edges = sorted(el.edges, key=mesh.face_index.__getitem__)
    total = 0.0
    for f in edges:
        total += minimal_pair_error(u, mesh, f, ctx)
    return total


def global_functional_E(u: Target, mesh: Mesh, ctx: RDContext) -> float:
    total = 0.0
    for eid in mesh.leaves:
        total += error_functional_e(u, mesh, eid, ctx)
    return total


# ---------------------------------------------------------------------------
# augmented element quantities


def _face_points(a, b, degree):
    s, w = element.line_rule(2 * degree + 2)
    return a + np.outer(s, b - a), w * float(np.hypot(*(b - a)))


def jump_augmented(u: Target, mesh: Mesh, ctx: RDContext, elem: dict | None = None):
    """Per interior face: h_F ||P1 - P2||_F^2 + both element errors squared.

    h_F = min(|K1|, |K2|) / |F| and P_i are the element best approximations.
    Returns (per-face dict, sqrt of the sum).
    """
    coeffs = {}
    errs = {}
    for eid in mesh.leaves:
        best = best_on_element(u, mesh.coords(eid), ctx)
        coeffs[eid] = best.function
        errs[eid] = best.error_sq if elem is None else elem[eid]
    terms = {}
    for f in mesh.interior_faces:
        k1, k2 = mesh.faces[f]
        a, b = mesh.master.point(f[0]), mesh.master.point(f[1])
        pts, w = _face_points(a, b, ctx.degree)
        p1 = element.eval_physical(mesh.coords(k1), ctx.degree, coeffs[k1], pts)
        p2 = element.eval_physical(mesh.coords(k2), ctx.degree, coeffs[k2], pts)
        length = float(np.hypot(*(b - a)))
        h_f = min(mesh.area(k1), mesh.area(k2)) / length
        terms[f] = h_f * float(w @ (p1 - p2) ** 2) + errs[k1] + errs[k2]
    return terms, _sqrt_sum(terms.values())


def trace_augmented_element(u: Target, tri: np.ndarray, ctx: RDContext):
    """Minimize |||u - P|||_K^2 + (|K| / |dK|) ||u - P||_dK^2 over P in P_l(K).

    Returns (minimal value, coefficients).
    """
    eps, degree = ctx.epsilon, ctx.degree
    tri = np.asarray(tri, dtype=float)
    lm = local_matrices(tri, degree)
    data = triangle_data(u, tri, degree)
    weight = lm.area / float(lm.edge_lengths.sum())
    basis = element.reference_basis(degree)
    A = lm.mass + eps * lm.stiffness
    b = data.rhs(eps)
    edges = []
    for i in range(3):
        e = u.edge_quad(tri[(i + 1) % 3], tri[(i + 2) % 3], degree)
        phi = basis.eval(geometry.to_reference(tri, e.points))
        edges.append((e, phi))
        A = A + weight * (phi * e.weights[:, None]).T @ phi
        b = b + weight * phi.T @ (e.weights * e.values)
    c = np.linalg.solve(A, b)
    value = data.error_sq(c, eps)
    scale = data.norm_sq(eps)
    for e, phi in edges:
        value += weight * float(e.weights @ (e.values - phi @ c) ** 2)
        scale += weight * float(e.weights @ e.values**2)
    return clamp_error_sq(value, scale), c


def trace_functional(u: Target, tri: np.ndarray, ctx: RDContext, coeffs: np.ndarray) -> float:
    """The trace-augmented functional evaluated at a given local polynomial."""
    degree = ctx.degree
    tri = np.asarray(tri, dtype=float)
    lm = local_matrices(tri, degree)
    weight = lm.area / float(lm.edge_lengths.sum())
    basis = element.reference_basis(degree)
    value = triangle_data(u, tri, degree).error_sq(coeffs, ctx.epsilon)
    for i in range(3):
        e = u.edge_quad(tri[(i + 1) % 3], tri[(i + 2) % 3], degree)
        phi = basis.eval(geometry.to_reference(tri, e.points))
        value += weight * float(e.weights @ (e.values - phi @ coeffs) ** 2)
    return value


def trace_augmented(u: Target, mesh: Mesh, ctx: RDContext):
    terms = {eid: trace_augmented_element(u, mesh.coords(eid), ctx)[0] for eid in mesh.leaves}
    return terms, _sqrt_sum(terms.values())


# ---------------------------------------------------------------------------
# reports


def _base_report(u, mesh, ctx, pair_bc=None):
    glob = global_best(u, mesh, ctx)
    elem = element_errors(u, mesh, ctx)
    pairs = pair_errors(u, mesh, ctx, pair_bc)
    st = mesh_stats(mesh)
    return LocalizationReport(
        epsilon=ctx.epsilon, degree=ctx.degree, bc=ctx.bc,
        global_error=glob.error, norm=math.sqrt(max(glob.norm_sq, 0.0)),
        element_sum=_sqrt_sum(elem.values()), pair_sum=_sqrt_sum(pairs.values()),
        element_errors=elem, pair_errors=pairs, mesh_hash=mesh.hash(), target=u.name,
        stats={"mu": st.mu, "sigma": st.sigma, "nbar": st.nbar,
               "face_connected": st.face_connected, "elements": len(mesh)},
    )


def pair_localization(u: Target, mesh: Mesh, ctx: RDContext) -> LocalizationReport:
    """Global error, interior-face pair sum and element sum."""
    return _base_report(u, mesh, ctx)


def full_report(u: Target, mesh: Mesh, ctx: RDContext) -> LocalizationReport:
    """Every localized quantity: pairs, minimal pairs, jump and trace augmentation."""
    if ctx.dirichlet:
        return dirichlet_pair_localization(u, mesh, ctx, full=True)
    rep = _base_report(u, mesh, ctx)
    _fill_extras(rep, u, mesh, ctx)
    return rep


def _fill_extras(rep, u, mesh, ctx):
    rep.minimal_pair_errors = minimal_pair_errors(u, mesh, ctx)
    rep.minimal_pair_sum = _sqrt_sum(rep.minimal_pair_errors.values())
    if u.h1 or ctx.epsilon == 0:
        rep.jump_terms, rep.jump_augmented_sum = jump_augmented(u, mesh, ctx, rep.element_errors)
        rep.trace_terms, rep.trace_augmented_sum = trace_augmented(u, mesh, ctx)


def dirichlet_pair_localization(u: Target, mesh: Mesh, ctx: RDContext,
                                full: bool = False) -> LocalizationReport:
    """Localization with zero boundary values.

    Pairs with a face on the boundary use the zero-trace space; other pairs
    use the unconstrained space.  The sum with the zero-trace space on every
    pair is reported alongside as ``pair_sum_zero``.
    """
    if not ctx.dirichlet:
        ctx = RDContext(ctx.epsilon, ctx.degree, "dirichlet")
    trace = u.boundary_max(mesh)
    if trace > DIRICHLET_TOL:
        raise BoundaryTraceError(f"target does not vanish on the boundary (max |u| = {trace:.2e})")
    rep = _base_report(u, mesh, ctx, "local-spaces")
    zero = pair_errors(u, mesh, ctx, "zero")
    rep.pair_sum_zero = _sqrt_sum(zero.values())
    if full:
        _fill_extras(rep, u, mesh, ctx)
    return rep
