"""Functions to be approximated, and the quadrature that integrates them.

An analytic target carries its value, its gradient and the straight lines
along which either of them may jump.  Integration splits triangles along
those lines and then subdivides adaptively until the moments against low
degree polynomials settle.  A discrete target is a piecewise polynomial on a
fine triangulation and is integrated exactly by clipping against it.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import element, geometry

log = logging.getLogger(__name__)

Line = tuple[float, float, float]  # a x + b y = c

ADAPT_RTOL = 1e-10
ADAPT_MAX_LEVEL = 10


@dataclass(frozen=True)
class QuadData:
    """Physical quadrature points and weights with target samples."""

    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    grads: np.ndarray

    def __add__(self, other: "QuadData") -> "QuadData":
        return QuadData(
            np.concatenate([self.points, other.points]),
            np.concatenate([self.weights, other.weights]),
            np.concatenate([self.values, other.values]),
            np.concatenate([self.grads, other.grads]),
        )


@dataclass(frozen=True)
class EdgeData:
    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray


class Target:
    """Common interface; subclasses provide ``quad`` and ``edge_quad``."""

    name: str = "target"
    # False for targets with jumps; their gradient part is not defined.
    h1: bool = True

    def __init__(self):
        self._cache: dict = {}
        self._lock = threading.Lock()

    def value(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _quad(self, tri: np.ndarray, degree: int) -> QuadData:
        raise NotImplementedError

    def _edge_quad(self, a: np.ndarray, b: np.ndarray, degree: int) -> EdgeData:
        raise NotImplementedError

    def quad(self, tri: np.ndarray, degree: int) -> QuadData:
        """Quadrature on ``tri`` accurate for products with P_degree functions."""
        tri = np.asarray(tri, dtype=float)
        key = ("t", tri.tobytes(), degree)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._quad(tri, degree)
            with self._lock:
                self._cache[key] = hit
        return hit

    def edge_quad(self, a, b, degree: int) -> EdgeData:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        key = ("e", a.tobytes(), b.tobytes(), degree)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._edge_quad(a, b, degree)
            with self._lock:
                self._cache[key] = hit
        return hit

    def boundary_max(self, mesh) -> float:
        """Largest |u| sampled on the boundary faces of ``mesh``."""
        worst = 0.0
        s = np.linspace(0.0, 1.0, 7)
        for a, b in mesh.boundary_faces:
            pa, pb = mesh.master.point(a), mesh.master.point(b)
            pts = pa + np.outer(s, pb - pa)
            worst = max(worst, float(np.abs(self.value(pts)).max()))
        return worst


def _quad_degree(degree: int) -> int:
    # The squared residual needs far more relative accuracy than the moments
    # that steer the subdivision, hence the generous base rule.
    return 2 * degree + 10


def _subdivide4_batch(tris: np.ndarray) -> np.ndarray:
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    kids = np.stack([
        np.stack([a, ab, ca], axis=1), np.stack([ab, b, bc], axis=1),
        np.stack([ca, bc, c], axis=1), np.stack([ab, bc, ca], axis=1),
    ], axis=1)
    return kids.reshape(-1, 3, 2)


class AnalyticTarget(Target):
    """Target given by callables, with declared kink (or jump) lines."""

    def __init__(self, value: Callable, gradient: Callable, kink_lines: Sequence[Line] = (),
                 name: str = "analytic", h1: bool = True):
        super().__init__()
        self._value = value
        self._gradient = gradient
        self.kink_lines = tuple(tuple(float(c) for c in ln) for ln in kink_lines)
        self.name = name
        self.h1 = h1

    def value(self, pts):
        return np.asarray(self._value(np.atleast_2d(np.asarray(pts, dtype=float))), dtype=float)

    def gradient(self, pts):
        return np.asarray(self._gradient(np.atleast_2d(np.asarray(pts, dtype=float))), dtype=float)

    def _batch(self, tris: np.ndarray, rule: element.QuadratureRule, anchor, scale, mono):
        """Points, weights and moment vectors for a stack of triangles (m, 3, 2)."""
        e1 = tris[:, 1] - tris[:, 0]
        e2 = tris[:, 2] - tris[:, 0]
        det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        pts = (tris[:, None, 0] + rule.points[None, :, 0:1] * e1[:, None]
               + rule.points[None, :, 1:2] * e2[:, None])
        w = det[:, None] * rule.weights[None, :]
        flat = pts.reshape(-1, 2)
        u = self.value(flat).reshape(w.shape)
        g = self.gradient(flat).reshape(w.shape + (2,)) * scale
        rel = (pts - anchor) / scale
        m = np.stack([rel[..., 0] ** i * rel[..., 1] ** j for i, j in mono], axis=-1)
        mom = np.concatenate([
            np.einsum("tq,tqk->tk", w * u, m),
            np.einsum("tq,tqk->tk", w * g[..., 0], m),
            np.einsum("tq,tqk->tk", w * g[..., 1], m),
        ], axis=1)
        return pts, w, mom, 0.5 * det

    def _quad(self, tri, degree):
        rule = element.triangle_rule(_quad_degree(degree))
        mono = element._monomials(degree + 1)
        scale = geometry.diameter(tri)
        anchor = tri[0]
        pieces = geometry.split_by_lines(tri, self.kink_lines) if self.kink_lines else [tri]
        area = geometry.area(tri)
        _, _, mom, _ = self._batch(tri[None], rule, anchor, scale, mono)
        top = max(float(np.abs(mom).max()), 1e-300)
        pts_all, w_all = [], []
        active = np.array(pieces)
        _, _, coarse, _ = self._batch(active, rule, anchor, scale, mono)
        level = 0
        while len(active):
            kids = _subdivide4_batch(active)
            kpts, kw, kmom, karea = self._batch(kids, rule, anchor, scale, mono)
            fine = kmom.reshape(len(active), 4, -1).sum(axis=1)
            parea = karea.reshape(len(active), 4).sum(axis=1)
            tol = ADAPT_RTOL * np.maximum(top * parea / area, np.abs(fine).max(axis=1))
            ok = np.abs(fine - coarse).max(axis=1) <= tol
            level += 1
            if level >= ADAPT_MAX_LEVEL and not ok.all():
                log.warning("adaptive quadrature hit the level cap on %s", self.name)
                ok[:] = True
            kok = np.repeat(ok, 4)
            pts_all.append(kpts[kok].reshape(-1, 2))
            w_all.append(kw[kok].ravel())
            active = kids[~kok]
            coarse = kmom[~kok]
        pts = np.concatenate(pts_all)
        w = np.concatenate(w_all)
        return QuadData(pts, w, self.value(pts), self.gradient(pts))

    def _edge_quad(self, a, b, degree):
        x, wx = element.line_rule(_quad_degree(degree))
        length = float(np.hypot(*(b - a)))
        breaks = [0.0] + geometry.segment_line_params(a, b, self.kink_lines) + [1.0]
        pts_all, w_all = [], []

        def rule(lo, hi):
            t = lo + (hi - lo) * x
            return t, wx * (hi - lo)

        def moments(t, w):
            u = self.value(a + np.outer(t, b - a))
            return np.array([(w * u * t**k).sum() for k in range(degree + 2)])

        for lo, hi in zip(breaks[:-1], breaks[1:]):
            t, w = rule(lo, hi)
            top = max(float(np.abs(moments(t, w)).max()), 1e-300)
            stack = [(lo, hi, moments(t, w), 0)]
            while stack:
                l0, h0, coarse, level = stack.pop()
                mid = 0.5 * (l0 + h0)
                (t1, w1), (t2, w2) = rule(l0, mid), rule(mid, h0)
                m1, m2 = moments(t1, w1), moments(t2, w2)
                fine = m1 + m2
                if np.abs(fine - coarse).max() <= ADAPT_RTOL * top * max(h0 - l0, 1e-6) or level + 1 >= ADAPT_MAX_LEVEL:
                    pts_all += [t1, t2]
                    w_all += [w1, w2]
                else:
                    stack += [(l0, mid, m1, level + 1), (mid, h0, m2, level + 1)]
        t = np.concatenate(pts_all)
        w = np.concatenate(w_all) * length
        pts = a + np.outer(t, b - a)
        return EdgeData(pts, w, self.value(pts))


class DiscreteTarget(Target):
    """Piecewise polynomial target on a fine triangulation.

    ``triangles`` is an (n, 3, 2) array and ``coeffs`` an (n, nbasis) array of
    local nodal values of degree ``degree`` on each triangle.
    """

    def __init__(self, triangles, coeffs, degree: int, name: str = "discrete"):
        super().__init__()
        self.triangles = np.asarray(triangles, dtype=float)
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.degree = degree
        self.name = name
        self.h1 = True
        self._lo = self.triangles.min(axis=1)
        self._hi = self.triangles.max(axis=1)
        self.kink_lines = ()

    @classmethod
    def from_function(cls, fn, degree: int, name: str = "discrete") -> "DiscreteTarget":
        """Nodal interpolant of ``fn`` on the mesh of the FE function ``fn``."""
        tris = np.array([fn.space.mesh.coords(e) for e in fn.space.mesh.leaves])
        return cls(tris, fn.local_coefficients(), degree, name)

    def _candidates(self, lo, hi):
        tol = geometry.GEOM_TOL * max(float(np.abs(hi - lo).max()), 1.0)
        mask = np.all(self._lo <= hi + tol, axis=1) & np.all(self._hi >= lo - tol, axis=1)
        return np.nonzero(mask)[0]

    def _local(self, k: int, pts: np.ndarray):
        tri = self.triangles[k]
        basis = element.reference_basis(self.degree)
        ref = geometry.to_reference(tri, pts)
        vals = basis.eval(ref) @ self.coeffs[k]
        ginv = np.linalg.inv(element.jacobian(tri))
        grads = np.einsum("qjd,j->qd", basis.grad(ref) @ ginv, self.coeffs[k])
        return vals, grads

    def _eval(self, pts, want_grad):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.full(len(pts), np.nan)
        grad = np.full((len(pts), 2), np.nan)
        for k in self._candidates(pts.min(axis=0), pts.max(axis=0)):
            inside = geometry.point_in_triangle(self.triangles[k], pts, 1e-10) & np.isnan(out)
            if inside.any():
                v, g = self._local(k, pts[inside])
                out[inside] = v
                grad[inside] = g
        return grad if want_grad else out

    def value(self, pts):
        return self._eval(pts, False)

    def gradient(self, pts):
        return self._eval(pts, True)

    def _quad(self, tri, degree):
        tri = np.asarray(tri, dtype=float)
        if geometry.signed_area(tri) < 0:
            tri = tri[[0, 2, 1]]
        rule = element.triangle_rule(degree + self.degree + max(degree, self.degree) + 2)
        min_area = (geometry.GEOM_TOL * geometry.diameter(tri)) ** 2
        pts_all, w_all, v_all, g_all = [], [], [], []
        for k in self._candidates(tri.min(axis=0), tri.max(axis=0)):
            fine = self.triangles[k]
            if geometry.signed_area(fine) < 0:
                fine = fine[[0, 2, 1]]
            poly = geometry.clip_convex(fine, tri)
            for piece in geometry.fan_triangulate(poly, min_area):
                pts = element.to_physical(piece, rule.points)
                w = rule.weights * 2.0 * geometry.area(piece)
                v, g = self._local(k, pts)
                pts_all.append(pts)
                w_all.append(w)
                v_all.append(v)
                g_all.append(g)
        return QuadData(np.concatenate(pts_all), np.concatenate(w_all),
                        np.concatenate(v_all), np.concatenate(g_all))

    def _edge_quad(self, a, b, degree):
        x, wx = element.line_rule(degree + self.degree + 2)
        length = float(np.hypot(*(b - a)))
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        breaks = {0.0, 1.0}
        for k in self._candidates(lo, hi):
            tri = self.triangles[k]
            lines = []
            for i in range(3):
                p, q = tri[i], tri[(i + 1) % 3]
                n = np.array([q[1] - p[1], p[0] - q[0]])
                lines.append((n[0], n[1], float(n @ p)))
            breaks.update(geometry.segment_line_params(a, b, lines))
        breaks = sorted(breaks)
        pts_all, w_all, v_all = [], [], []
        for l0, h0 in zip(breaks[:-1], breaks[1:]):
            if h0 - l0 <= geometry.GEOM_TOL:
                continue
            t = l0 + (h0 - l0) * x
            pts = a + np.outer(t, b - a)
            pts_all.append(pts)
            w_all.append(wx * (h0 - l0) * length)
            v_all.append(self.value(pts))
        return EdgeData(np.concatenate(pts_all), np.concatenate(w_all), np.concatenate(v_all))


# ---------------------------------------------------------------------------
# built-in targets


def counterexample_target(eps: float) -> AnalyticTarget:
    """u_eps = clip(x / sqrt(eps), -1, 1): kinks at x = +-sqrt(eps)."""
    if eps <= 0:
        return step_target()
    d = np.sqrt(eps)

    def value(p):
        return np.clip(p[:, 0] / d, -1.0, 1.0)

    def gradient(p):
        g = np.zeros_like(p)
        g[:, 0] = np.where(np.abs(p[:, 0]) < d, 1.0 / d, 0.0)
        return g

    return AnalyticTarget(value, gradient, [(1.0, 0.0, d), (1.0, 0.0, -d)], name="counterexample-u_eps")


def step_target() -> AnalyticTarget:
    """sign(x), with value 0 on x = 0.  Only its L2 part is meaningful."""

    def value(p):
        return np.sign(p[:, 0])

    def gradient(p):
        return np.zeros_like(p)

    return AnalyticTarget(value, gradient, [(1.0, 0.0, 0.0)], name="step", h1=False)


def smooth_target() -> AnalyticTarget:
    def value(p):
        return np.sin(1.3 * p[:, 0] + 0.4) * np.cos(0.9 * p[:, 1] - 0.2) + 0.5

    def gradient(p):
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([
            1.3 * np.cos(1.3 * x + 0.4) * np.cos(0.9 * y - 0.2),
            -0.9 * np.sin(1.3 * x + 0.4) * np.sin(0.9 * y - 0.2),
        ])

    return AnalyticTarget(value, gradient, name="smooth-sine")


def bubble_target(box) -> AnalyticTarget:
    """sin bubble vanishing on the boundary of the rectangle ``box``."""
    x0, x1, y0, y1 = box
    kx, ky = np.pi / (x1 - x0), np.pi / (y1 - y0)

    def value(p):
        return np.sin(kx * (p[:, 0] - x0)) * np.sin(ky * (p[:, 1] - y0))

    def gradient(p):
        sx, sy = np.sin(kx * (p[:, 0] - x0)), np.sin(ky * (p[:, 1] - y0))
        cx, cy = np.cos(kx * (p[:, 0] - x0)), np.cos(ky * (p[:, 1] - y0))
        return np.column_stack([kx * cx * sy, ky * sx * cy])

    return AnalyticTarget(value, gradient, name="smooth-bubble")


def boundary_layer_target(eps: float, box) -> AnalyticTarget:
    """min{1, dist(., boundary) / sqrt(eps)} on the rectangle ``box``.

    Piecewise linear; the kink lines are the offset lines at distance
    sqrt(eps) and the corner bisectors.
    """
    x0, x1, y0, y1 = box
    d = np.sqrt(eps)

    def dists(p):
        return np.stack([p[:, 0] - x0, x1 - p[:, 0], p[:, 1] - y0, y1 - p[:, 1]], axis=1)

    normals = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])

    def value(p):
        return np.minimum(1.0, dists(p).min(axis=1) / d)

    def gradient(p):
        dd = dists(p)
        k = dd.argmin(axis=1)
        g = normals[k] / d
        g[dd.min(axis=1) >= d] = 0.0
        return g

    lines = [
        (1.0, 0.0, x0 + d), (1.0, 0.0, x1 - d), (0.0, 1.0, y0 + d), (0.0, 1.0, y1 - d),
        (1.0, -1.0, x0 - y0), (1.0, 1.0, x0 + y1), (1.0, 1.0, x1 + y0), (1.0, -1.0, x1 - y1),
        (1.0, 0.0, 0.5 * (x0 + x1)), (0.0, 1.0, 0.5 * (y0 + y1)),
    ]
    return AnalyticTarget(value, gradient, lines, name="boundary-layer")


def regularized_step_target(width: float = 0.05) -> AnalyticTarget:
    def value(p):
        return np.tanh(p[:, 0] / width)

    def gradient(p):
        g = np.zeros_like(p)
        g[:, 0] = 1.0 / (width * np.cosh(p[:, 0] / width) ** 2)
        return g

    return AnalyticTarget(value, gradient, name="regularized-step")


def polynomial_target(degree: int, seed: int = 0) -> AnalyticTarget:
    """Random polynomial of total degree ``degree`` (fixed seed)."""
    rng = np.random.default_rng(seed)
    mono = element._monomials(degree)
    c = rng.standard_normal(len(mono))

    def value(p):
        return sum(ci * p[:, 0] ** i * p[:, 1] ** j for ci, (i, j) in zip(c, mono))

    def gradient(p):
        x, y = p[:, 0], p[:, 1]
        gx = sum(ci * i * x ** max(i - 1, 0) * y**j for ci, (i, j) in zip(c, mono) if i > 0)
        gy = sum(ci * j * x**i * y ** max(j - 1, 0) for ci, (i, j) in zip(c, mono) if j > 0)
        zero = np.zeros_like(x)
        return np.column_stack([zero + gx, zero + gy])

    return AnalyticTarget(value, gradient, name="polynomial")


TARGETS = ("counterexample-u_eps", "step", "smooth-sine", "smooth-bubble", "boundary-layer",
           "polynomial", "regularized-step")


def make_target(name: str, eps: float = 0.0, degree: int = 1, box=(-2.0, 2.0, -1.0, 1.0),
                seed: int = 0) -> Target:
    if name == "counterexample-u_eps":
        return counterexample_target(eps)
    if name == "step":
        return step_target()
    if name == "smooth-sine":
        return smooth_target()
    if name == "smooth-bubble":
        return bubble_target(box)
    if name == "boundary-layer":
        return boundary_layer_target(max(eps, 1e-300), box)
    if name == "polynomial":
        return polynomial_target(degree, seed)
    if name == "regularized-step":
        return regularized_step_target()
    raise ValueError(f"unknown target {name!r}; choose from {', '.join(TARGETS)}")


def gradient_mismatch(target: AnalyticTarget, pts: np.ndarray, h: float = 1e-6) -> float:
    """Max deviation between the declared gradient and central differences."""
    pts = np.atleast_2d(pts)
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    fd = np.column_stack([
        (target.value(pts + ex) - target.value(pts - ex)) / (2 * h),
        (target.value(pts + ey) - target.value(pts - ey)) / (2 * h),
    ])
    return float(np.abs(fd - target.gradient(pts)).max())
