"""Lagrange elements on triangles: bases, dual bases, quadrature, local matrices."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from . import geometry
from .errors import DegenerateGeometryError

REFERENCE_AREA = 0.5
MAX_DEGREE = 3


def lattice(degree: int) -> list[tuple[int, int, int]]:
    """Barycentric multi-indices of order ``degree``, lexicographically descending."""
    return sorted(
        ((a, b, degree - a - b) for a in range(degree + 1) for b in range(degree + 1 - a)),
        reverse=True,
    )


def _monomials(degree: int) -> list[tuple[int, int]]:
    return [(i, n - i) for n in range(degree + 1) for i in range(n, -1, -1)]


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on the reference triangle conv{0, e1, e2}."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Collapsed-coordinate Gauss-Jacobi product rule exact to ``degree``.

    With x = s (1 - t), y = t the Jacobian is (1 - t); a Gauss-Jacobi rule with
    weight (1 - t) in t and Gauss-Legendre in s give all monomials of total
    degree <= 2n - 1 exactly.
    """
    n = max(1, (degree + 2) // 2)
    s, ws = roots_legendre(n)
    t, wt = roots_jacobi(n, 1.0, 0.0)
    s, ws = 0.5 * (s + 1.0), 0.5 * ws
    t, wt = 0.5 * (t + 1.0), 0.25 * wt
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    pts = np.column_stack([(S * (1.0 - T)).ravel(), T.ravel()])
    return QuadratureRule(pts, W.ravel(), 2 * n - 1)


@lru_cache(maxsize=None)
def line_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [0, 1]."""
    n = max(1, (degree + 2) // 2)
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


class ReferenceBasis:
    """Nodal Lagrange basis of degree ``degree`` on the reference triangle."""

    def __init__(self, degree: int):
        if degree < 0:
            raise ValueError("degree must be non-negative")
        self.degree = degree
        self.multi_indices = lattice(degree) if degree > 0 else [(1, 0, 0)]
        if degree == 0:
            self.nodes = np.array([[1.0 / 3.0, 1.0 / 3.0]])
        else:
            self.nodes = np.array([[b / degree, c / degree] for _, b, c in self.multi_indices])
        self.kinds = tuple(self._kind(a) for a in self.multi_indices) if degree > 0 else ("interior",)
        self.monomials = _monomials(degree)
        vander = self._monomial_table(self.nodes)
        # column j of coeffs holds the monomial coefficients of basis function j
        self.coeffs = np.linalg.inv(vander)

    @staticmethod
    def _kind(alpha) -> str:
        nz = sum(1 for a in alpha if a > 0)
        return {1: "vertex", 2: "edge", 3: "interior"}[nz]

    def __len__(self) -> int:
        return len(self.multi_indices)

    def _monomial_table(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0:1], pts[:, 1:2]
        i = np.array([m[0] for m in self.monomials])
        j = np.array([m[1] for m in self.monomials])
        return x**i * y**j

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Basis values at reference points, shape (npts, nbasis)."""
        return self._monomial_table(pts) @ self.coeffs

    def grad(self, pts: np.ndarray) -> np.ndarray:
        """Reference gradients, shape (npts, nbasis, 2)."""
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0:1], pts[:, 1:2]
        i = np.array([m[0] for m in self.monomials])
        j = np.array([m[1] for m in self.monomials])
        dx = np.where(i > 0, i * x ** np.maximum(i - 1, 0) * y**j, 0.0)
        dy = np.where(j > 0, j * x**i * y ** np.maximum(j - 1, 0), 0.0)
        return np.stack([dx @ self.coeffs, dy @ self.coeffs], axis=-1)

    def node_keys(self, vertex_ids) -> list[frozenset]:
        """Keys identifying nodes shared between elements.

        A node is determined by the global ids of the element vertices with
        non-zero barycentric index together with those indices.
        """
        return [
            frozenset((vertex_ids[k], a[k]) for k in range(3) if a[k] > 0)
            for a in self.multi_indices
        ]

    def edge_nodes(self, i: int) -> list[int]:
        """Indices of nodes on the closed edge opposite vertex ``i``."""
        return [n for n, a in enumerate(self.multi_indices) if a[i] == 0]


@lru_cache(maxsize=None)
def reference_basis(degree: int) -> ReferenceBasis:
    return ReferenceBasis(degree)


@lru_cache(maxsize=None)
def reference_mass(degree: int) -> np.ndarray:
    basis = reference_basis(degree)
    rule = triangle_rule(2 * degree + 2)
    phi = basis.eval(rule.points)
    return (phi * rule.weights[:, None]).T @ phi


def jacobian(tri: np.ndarray) -> np.ndarray:
    return np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])


def check_geometry(tri: np.ndarray) -> float:
    tri = np.asarray(tri, dtype=float)
    a = geometry.area(tri)
    scale = geometry.diameter(tri)
    if not np.isfinite(a) or a < 1e-14 * max(scale, 1e-300) ** 2 or a == 0.0:
        raise DegenerateGeometryError(f"degenerate triangle with area {a:g}")
    return a


def edge_points(tri_ref_edge: int, s: np.ndarray) -> np.ndarray:
    """Reference points on the edge opposite reference vertex ``i``.

    The edge is traversed from vertex ``i + 1`` to vertex ``i + 2``.
    """
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    a = corners[(tri_ref_edge + 1) % 3]
    b = corners[(tri_ref_edge + 2) % 3]
    return a + np.outer(s, b - a)


@dataclass(frozen=True)
class LocalMatrices:
    """Physical mass, stiffness, boundary and per-edge mass matrices."""

    mass: np.ndarray
    stiffness: np.ndarray
    boundary_mass: np.ndarray
    edge_mass: np.ndarray  # (3, n, n), edge i opposite vertex i
    area: float
    edge_lengths: np.ndarray

    def face_mass(self, i: int) -> np.ndarray:
        return self.edge_mass[i]


def assemble_local(tri: np.ndarray, degree: int, quad_degree: int | None = None) -> LocalMatrices:
    tri = np.asarray(tri, dtype=float)
    area = check_geometry(tri)
    basis = reference_basis(degree)
    q = 2 * degree + 2 if quad_degree is None else quad_degree
    rule = triangle_rule(q)
    jac = jacobian(tri)
    det = abs(np.linalg.det(jac))
    phi = basis.eval(rule.points)
    w = rule.weights * det
    mass = (phi * w[:, None]).T @ phi
    ginv = np.linalg.inv(jac)
    grads = basis.grad(rule.points) @ ginv  # (np, nb, 2): ref grad times J^{-1}
    stiff = np.einsum("q,qid,qjd->ij", w, grads, grads)
    lengths = geometry.edge_lengths(tri)
    s, ws = line_rule(q)
    emass = np.zeros((3, len(basis), len(basis)))
    for i in range(3):
        pe = basis.eval(edge_points(i, s))
        emass[i] = (pe * (ws * lengths[i])[:, None]).T @ pe
    mass = 0.5 * (mass + mass.T)
    stiff = 0.5 * (stiff + stiff.T)
    return LocalMatrices(mass, stiff, emass.sum(axis=0), emass, area, lengths)


class DualBasis:
    """L2 dual basis of the Lagrange basis on a physical triangle.

    ``matrix[z]`` holds the primal coefficients of psi_z, so that
    int_K psi_z phi_y = delta_zy.  On a physical element this is the reference
    inverse mass matrix scaled by |K_ref| / |K|.
    """

    def __init__(self, tri: np.ndarray, degree: int):
        self.degree = degree
        self.area = check_geometry(tri)
        self.matrix = np.linalg.inv(reference_mass(degree)) * (REFERENCE_AREA / self.area)

    def apply(self, moments: np.ndarray) -> np.ndarray:
        """Map moments (int u phi_y)_y to dual values (int u psi_z)_z."""
        return self.matrix @ moments


def to_physical(tri: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return geometry.from_reference(np.asarray(tri, dtype=float), ref)


def eval_physical(tri: np.ndarray, degree: int, coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate the local polynomial with nodal ``coeffs`` at physical points."""
    ref = geometry.to_reference(np.asarray(tri, dtype=float), pts)
    return reference_basis(degree).eval(ref) @ coeffs


def physical_nodes(tri: np.ndarray, degree: int) -> np.ndarray:
    return to_physical(tri, reference_basis(degree).nodes)
