"""Best approximations in the reaction-diffusion norm.

|||v|||^2 = ||v||^2 + eps ||grad v||^2.  Errors are evaluated by integrating the
residual directly with the target's quadrature, which keeps small errors
accurate; the Pythagoras form |||u|||^2 - c^T rhs is available as a check.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import element, geometry
from .errors import NegativeErrorSquared, SolverError
from .mesh import Mesh, Patch, element_patch, pair
from .solvers import pcg
from .targets import Target

CLAMP = 1e-12
# Relative size below which a squared error is indistinguishable from roundoff
# (an error below 1e-10 |||u|||, the quadrature tolerance).
EXACT_SNAP = 1e-20
BC_MODES = ("none", "dirichlet")
PATCH_BC = ("none", "zero", "local-spaces")


@dataclass(frozen=True)
class RDContext:
    epsilon: float = 0.0
    degree: int = 1
    bc: str = "none"

    def __post_init__(self):
        if not (self.epsilon >= 0.0 and np.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if self.degree not in (1, 2, 3):
            raise ValueError(f"degree must be 1, 2 or 3, got {self.degree}")
        if self.bc not in BC_MODES:
            raise ValueError(f"bc must be one of {BC_MODES}, got {self.bc!r}")

    @property
    def dirichlet(self) -> bool:
        return self.bc == "dirichlet"


def clamp_error_sq(value: float, scale: float = 1.0) -> float:
    """Snap roundoff-sized squared errors to zero, reject real negatives."""
    if value >= 0.0:
        return 0.0 if value <= EXACT_SNAP * scale else float(value)
    if value >= -CLAMP * max(scale, 1.0):
        return 0.0
    raise NegativeErrorSquared(f"squared error {value:.3e} is negative beyond roundoff")


def _check_target(u: Target, eps: float) -> None:
    if eps > 0 and not u.h1:
        raise ValueError(f"target {u.name!r} has jumps; only eps = 0 is meaningful")


# ---------------------------------------------------------------------------
# per-triangle data


@lru_cache(maxsize=200_000)
def _local_matrices(tri_bytes: bytes, degree: int) -> element.LocalMatrices:
    return element.assemble_local(np.frombuffer(tri_bytes).reshape(3, 2), degree)


def local_matrices(tri: np.ndarray, degree: int) -> element.LocalMatrices:
    return _local_matrices(np.ascontiguousarray(tri, dtype=float).tobytes(), degree)


@dataclass(frozen=True)
class TriangleData:
    """Target samples and basis tables on one triangle."""

    weights: np.ndarray
    u: np.ndarray
    grad_u: np.ndarray
    phi: np.ndarray  # (nq, nb)
    grad_phi: np.ndarray  # (nq, nb, 2)

    def rhs(self, eps: float) -> np.ndarray:
        b = self.phi.T @ (self.weights * self.u)
        if eps > 0:
            b += eps * np.einsum("qjd,qd->j", self.grad_phi, self.weights[:, None] * self.grad_u)
        return b

    def error_sq(self, coeffs: np.ndarray, eps: float) -> float:
        r = self.u - self.phi @ coeffs
        val = float(self.weights @ (r * r))
        if eps > 0:
            g = self.grad_u - np.einsum("qjd,j->qd", self.grad_phi, coeffs)
            val += eps * float(self.weights @ (g * g).sum(axis=1))
        return val

    def norm_sq(self, eps: float) -> float:
        val = float(self.weights @ (self.u * self.u))
        if eps > 0:
            val += eps * float(self.weights @ (self.grad_u**2).sum(axis=1))
        return val


_data_lock = threading.Lock()


def triangle_data(u: Target, tri: np.ndarray, degree: int) -> TriangleData:
    tri = np.ascontiguousarray(tri, dtype=float)
    key = ("tables", tri.tobytes(), degree)
    hit = u._cache.get(key)
    if hit is not None:
        return hit
    q = u.quad(tri, degree)
    basis = element.reference_basis(degree)
    ref = geometry.to_reference(tri, q.points)
    ginv = np.linalg.inv(element.jacobian(tri))
    data = TriangleData(q.weights, q.values, q.grads, basis.eval(ref), basis.grad(ref) @ ginv)
    with _data_lock:
        u._cache[key] = data
    return data


def dual_eval(u: Target, tri: np.ndarray, degree: int, z: int | None = None):
    """int_K u psi_z^K for node ``z`` (or all nodes when ``z`` is None)."""
    data = triangle_data(u, tri, degree)
    moments = data.phi.T @ (data.weights * data.u)
    vals = element.DualBasis(tri, degree).apply(moments)
    return vals if z is None else float(vals[z])


# ---------------------------------------------------------------------------
# local spaces on patches


def _node_on_boundary(alpha, bedges, bverts) -> bool:
    support = [k for k in range(3) if alpha[k] > 0]
    if len(support) == 1:
        return bool(bverts[support[0]])
    if len(support) == 2:
        opposite = 3 - sum(support)
        return bool(bedges[opposite])
    return False


@dataclass(frozen=True)
class LocalSpace:
    """Continuous piecewise P_degree functions on a patch."""

    patch: Patch
    degree: int
    dofs: np.ndarray  # (ntri, nb) local dof index per triangle node
    boundary: np.ndarray  # bool per dof
    free: np.ndarray  # bool per dof, False for removed Dirichlet dofs
    node_points: np.ndarray

    @property
    def n_dofs(self) -> int:
        return int(self.free.sum())


def patch_space(patch: Patch, degree: int, bc: str = "none") -> LocalSpace:
    if bc not in PATCH_BC:
        raise ValueError(f"patch bc must be one of {PATCH_BC}")
    basis = element.reference_basis(degree)
    _, cells = patch.local_mesh
    index: dict[frozenset, int] = {}
    dofs = np.zeros((len(patch), len(basis)), dtype=int)
    boundary: list[bool] = []
    points: list[np.ndarray] = []
    for i, tri in enumerate(patch.triangles):
        keys = basis.node_keys(cells[i])
        nodes = element.physical_nodes(tri, degree)
        for j, key in enumerate(keys):
            on_b = _node_on_boundary(basis.multi_indices[j], patch.boundary_edges[i],
                                     patch.boundary_vertices[i])
            if key not in index:
                index[key] = len(index)
                boundary.append(on_b)
                points.append(nodes[j])
            else:
                k = index[key]
                boundary[k] = boundary[k] or on_b
            dofs[i, j] = index[key]
    boundary_arr = np.array(boundary, dtype=bool)
    if bc == "zero":
        remove = boundary_arr
    elif bc == "local-spaces":
        remove = boundary_arr if patch.has_boundary_face else np.zeros_like(boundary_arr)
    else:
        remove = np.zeros_like(boundary_arr)
    return LocalSpace(patch, degree, dofs, boundary_arr, ~remove, np.array(points))


class PatchFunction:
    """Coefficient vector over a patch's glued space (removed dofs are zero)."""

    def __init__(self, space: LocalSpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = np.asarray(coeffs, dtype=float)
        if len(self.coeffs) != len(space.free):
            raise ValueError("coefficient length does not match the patch space")

    @property
    def patch(self) -> Patch:
        return self.space.patch

    @property
    def free_coefficients(self) -> np.ndarray:
        return self.coeffs[self.space.free]

    def local(self, i: int) -> np.ndarray:
        return self.coeffs[self.space.dofs[i]]

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.full(len(pts), np.nan)
        for i, tri in enumerate(self.patch.triangles):
            inside = geometry.point_in_triangle(tri, pts, 1e-10) & np.isnan(out)
            if inside.any():
                out[inside] = element.eval_physical(tri, self.space.degree, self.local(i), pts[inside])
        return out

    def integral(self) -> float:
        total = 0.0
        for i, tri in enumerate(self.patch.triangles):
            total += float(local_matrices(tri, self.space.degree).mass.sum(axis=0) @ self.local(i))
        return total


@dataclass(frozen=True)
class BestApproximation:
    function: object
    error_sq: float
    norm_sq: float = float("nan")
    pythagoras_sq: float = float("nan")

    @property
    def error(self) -> float:
        return float(np.sqrt(self.error_sq))


def _solve_dense(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(b) == 0:
        return np.zeros(0)
    try:
        return sla.cho_solve(sla.cho_factor(A), b)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError("local system is not positive definite (degenerate patch?)") from exc


def _default_patch_bc(ctx: RDContext) -> str:
    return "local-spaces" if ctx.dirichlet else "none"


def best_on_patch(u: Target, patch: Patch, ctx: RDContext, bc: str | None = None) -> BestApproximation:
    """Best approximation of ``u`` in the glued space on ``patch``."""
    eps = ctx.epsilon
    _check_target(u, eps)
    space = patch_space(patch, ctx.degree, _default_patch_bc(ctx) if bc is None else bc)
    n = len(space.free)
    A = np.zeros((n, n))
    b = np.zeros(n)
    datas = []
    for i, tri in enumerate(patch.triangles):
        lm = local_matrices(tri, ctx.degree)
        data = triangle_data(u, tri, ctx.degree)
        datas.append(data)
        d = space.dofs[i]
        A[np.ix_(d, d)] += lm.mass + eps * lm.stiffness
        b[d] += data.rhs(eps)
    free = space.free
    c = np.zeros(n)
    c[free] = _solve_dense(A[np.ix_(free, free)], b[free])
    err = sum(data.error_sq(c[space.dofs[i]], eps) for i, data in enumerate(datas))
    norm = sum(data.norm_sq(eps) for data in datas)
    pyth = norm - float(c[free] @ b[free])
    return BestApproximation(PatchFunction(space, c), clamp_error_sq(err, norm), norm, pyth)


def best_on_element(u: Target, tri: np.ndarray, ctx: RDContext) -> BestApproximation:
    """Best approximation in P_degree(K); ``function`` holds the nodal values."""
    eps = ctx.epsilon
    _check_target(u, eps)
    tri = np.asarray(tri, dtype=float)
    lm = local_matrices(tri, ctx.degree)
    data = triangle_data(u, tri, ctx.degree)
    b = data.rhs(eps)
    c = _solve_dense(lm.mass + eps * lm.stiffness, b)
    norm = data.norm_sq(eps)
    return BestApproximation(c, clamp_error_sq(data.error_sq(c, eps), norm), norm, norm - float(c @ b))


def best_seminorm_on_patch(u: Target, patch: Patch, degree: int) -> BestApproximation:
    """Minimize ||grad(u - P)|| over the patch space with int P = int u."""
    _check_target(u, 1.0)
    space = patch_space(patch, degree, "none")
    n = len(space.free)
    K = np.zeros((n + 1, n + 1))
    b = np.zeros(n + 1)
    datas = []
    for i, tri in enumerate(patch.triangles):
        lm = local_matrices(tri, degree)
        data = triangle_data(u, tri, degree)
        datas.append(data)
        d = space.dofs[i]
        K[np.ix_(d, d)] += lm.stiffness
        K[d, n] += lm.mass.sum(axis=1)
        b[d] += np.einsum("qjd,qd->j", data.grad_phi, data.weights[:, None] * data.grad_u)
        b[n] += float(data.weights @ data.u)
    K[n, :n] = K[:n, n]
    scale = np.abs(K).max()
    if np.linalg.cond(K / scale) > 1e13:
        raise SolverError("singular saddle-point system (degenerate patch)")
    sol = np.linalg.solve(K, b)
    c = sol[:n]
    err, norm = 0.0, 0.0
    for i, data in enumerate(datas):
        g = data.grad_u - np.einsum("qjd,j->qd", data.grad_phi, c[space.dofs[i]])
        err += float(data.weights @ (g * g).sum(axis=1))
        norm += float(data.weights @ (data.grad_u**2).sum(axis=1))
    return BestApproximation(PatchFunction(space, c), clamp_error_sq(err, norm), norm)


# ---------------------------------------------------------------------------
# global space


class FESpace:
    """Continuous piecewise P_degree functions on a conforming mesh."""

    def __init__(self, mesh: Mesh, degree: int):
        self.mesh = mesh
        self.degree = degree
        basis = element.reference_basis(degree)
        index: dict[frozenset, int] = {}
        dofs = np.zeros((len(mesh), len(basis)), dtype=int)
        boundary: list[bool] = []
        points: list[np.ndarray] = []
        bfaces = mesh.boundary_face_set
        bverts = mesh.boundary_vertices
        for n, el in enumerate(mesh.elements):
            nodes = element.physical_nodes(mesh.coords(el.id), degree)
            for j, key in enumerate(basis.node_keys(el.vertices)):
                if key not in index:
                    index[key] = len(index)
                    verts = [v for v, _ in key]
                    if len(verts) == 1:
                        on_b = verts[0] in bverts
                    elif len(verts) == 2:
                        on_b = (min(verts), max(verts)) in bfaces
                    else:
                        on_b = False
                    boundary.append(on_b)
                    points.append(nodes[j])
                dofs[n, j] = index[key]
        self.dofs = dofs
        self.boundary = np.array(boundary, dtype=bool)
        self.node_points = np.array(points)
        self.n_dofs = len(index)

    def interpolate(self, fn) -> "FEFunction":
        """Nodal interpolant of a callable on (n, 2) points."""
        return FEFunction(self, np.asarray(fn(self.node_points), dtype=float))


class FEFunction:
    def __init__(self, space: FESpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = np.asarray(coeffs, dtype=float)
        if len(self.coeffs) != space.n_dofs:
            raise ValueError("coefficient length does not match the global dof count")

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh

    def local_coefficients(self) -> np.ndarray:
        return self.coeffs[self.space.dofs]

    def error_sq(self, u: Target, eps: float) -> float:
        total = 0.0
        for n, eid in enumerate(self.mesh.leaves):
            data = triangle_data(u, self.mesh.coords(eid), self.space.degree)
            total += data.error_sq(self.coeffs[self.space.dofs[n]], eps)
        return total

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.full(len(pts), np.nan)
        for n, eid in enumerate(self.mesh.leaves):
            tri = self.mesh.coords(eid)
            inside = geometry.point_in_triangle(tri, pts, 1e-10) & np.isnan(out)
            if inside.any():
                out[inside] = element.eval_physical(tri, self.space.degree,
                                                    self.coeffs[self.space.dofs[n]], pts[inside])
        return out


@dataclass(frozen=True)
class GlobalBest(BestApproximation):
    iterations: int = 0


def assemble_global(u: Target, space: FESpace, eps: float):
    mesh = space.mesh
    nb = space.dofs.shape[1]
    rows, cols, vals = [], [], []
    b = np.zeros(space.n_dofs)
    norm = 0.0
    for n, eid in enumerate(mesh.leaves):
        tri = mesh.coords(eid)
        lm = local_matrices(tri, space.degree)
        data = triangle_data(u, tri, space.degree)
        d = space.dofs[n]
        rows.append(np.repeat(d, nb))
        cols.append(np.tile(d, nb))
        vals.append((lm.mass + eps * lm.stiffness).ravel())
        b[d] += data.rhs(eps)
        norm += data.norm_sq(eps)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(space.n_dofs, space.n_dofs))
    return A, b, norm


def global_best(u: Target, mesh: Mesh, ctx: RDContext) -> GlobalBest:
    """Best approximation over S (or S_0 in Dirichlet mode) via Jacobi PCG."""
    eps = ctx.epsilon
    _check_target(u, eps)
    space = FESpace(mesh, ctx.degree)
    A, b, norm = assemble_global(u, space, eps)
    free = ~space.boundary if ctx.dirichlet else np.ones(space.n_dofs, dtype=bool)
    c = np.zeros(space.n_dofs)
    res = pcg(A[free][:, free], b[free])
    c[free] = res.x
    fn = FEFunction(space, c)
    err = fn.error_sq(u, eps)
    return GlobalBest(fn, clamp_error_sq(err, norm), norm, norm - float(c[free] @ b[free]),
                      res.iterations)


# ---------------------------------------------------------------------------
# quasi-interpolation


def assigned_face(mesh: Mesh, eid: int):
    """Lowest-indexed interior face of element ``eid`` (None if it has none)."""
    interior = [k for k in mesh.element(eid).edges if len(mesh.faces[k]) == 2]
    if not interior:
        return None
    return min(interior, key=mesh.face_index.__getitem__)


def quasi_interpolate(u: Target, mesh: Mesh, ctx: RDContext) -> FEFunction:
    """Scott-Zhang type operator with pair projections for element-interior nodes.

    Skeleton nodes take the dual-basis average over the lowest-id element that
    contains them; element-interior nodes take the value of the best
    approximation on the pair of the element's assigned face (falling back to
    the element itself when it has no interior face).  In Dirichlet mode
    boundary nodes are set to zero.
    """
    _check_target(u, ctx.epsilon)
    space = FESpace(mesh, ctx.degree)
    basis = element.reference_basis(ctx.degree)
    coeffs = np.zeros(space.n_dofs)
    done = np.zeros(space.n_dofs, dtype=bool)
    for n, eid in enumerate(mesh.leaves):
        tri = mesh.coords(eid)
        d = space.dofs[n]
        duals = None
        for j, kind in enumerate(basis.kinds):
            g = d[j]
            if done[g]:
                continue
            if kind == "interior":
                face = assigned_face(mesh, eid)
                patch = pair(mesh, face) if face is not None else element_patch(mesh, eid)
                best = best_on_patch(u, patch, ctx)
                coeffs[g] = float(best.function(space.node_points[g : g + 1])[0])
            else:
                if duals is None:
                    duals = dual_eval(u, tri, ctx.degree)
                coeffs[g] = duals[j]
            done[g] = True
    if ctx.dirichlet:
        coeffs[space.boundary] = 0.0
    return FEFunction(space, coeffs)
