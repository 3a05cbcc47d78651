"""Small planar geometry helpers shared by the mesh and quadrature code."""

from __future__ import annotations

import numpy as np

# Absolute coincidence tolerance, applied to coordinates scaled by a reference
# diameter.
GEOM_TOL = 1e-12


def signed_area(tri: np.ndarray) -> float:
    (x0, y0), (x1, y1), (x2, y2) = tri
    return 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))


def area(tri: np.ndarray) -> float:
    return abs(signed_area(tri))


def edge_lengths(tri: np.ndarray) -> np.ndarray:
    """Lengths of the edges opposite vertices 0, 1, 2."""
    return np.array([
        np.hypot(*(tri[2] - tri[1])),
        np.hypot(*(tri[0] - tri[2])),
        np.hypot(*(tri[1] - tri[0])),
    ])


def diameter(tri: np.ndarray) -> float:
    return float(edge_lengths(tri).max())


def inball_diameter(tri: np.ndarray) -> float:
    """Diameter of the largest inscribed disc, 4|K| / perimeter."""
    return 4.0 * area(tri) / float(edge_lengths(tri).sum())


def midpoint(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Single code path for every midpoint in the package so that virtual and
    # materialized children carry bit-identical coordinates.
    return 0.5 * (np.asarray(a, dtype=float) + np.asarray(b, dtype=float))


def to_reference(tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Pull physical points back to the reference triangle conv{0, e1, e2}."""
    jac = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    return np.linalg.solve(jac, (np.atleast_2d(pts) - tri[0]).T).T


def from_reference(tri: np.ndarray, ref: np.ndarray) -> np.ndarray:
    jac = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    return tri[0] + np.atleast_2d(ref) @ jac.T


def clip_halfplane(poly: np.ndarray, normal, offset: float, tol: float = 0.0) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon to {x : normal . x <= offset}."""
    if len(poly) == 0:
        return poly
    normal = np.asarray(normal, dtype=float)
    dist = poly @ normal - offset
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        dp, dq = dist[i], dist[(i + 1) % n]
        if dp <= tol:
            out.append(p)
        if (dp < -tol and dq > tol) or (dp > tol and dq < -tol):
            t = dp / (dp - dq)
            out.append(p + t * (q - p))
    if not out:
        return np.empty((0, 2))
    return _dedupe(np.array(out))


def clip_convex(poly: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Intersection of a convex polygon with a counter-clockwise convex clipper."""
    out = poly
    n = len(clipper)
    for i in range(n):
        a, b = clipper[i], clipper[(i + 1) % n]
        edge = b - a
        # Outward normal of a counter-clockwise polygon edge.
        normal = np.array([edge[1], -edge[0]])
        out = clip_halfplane(out, normal, float(normal @ a))
        if len(out) < 3:
            return np.empty((0, 2))
    return out


def _dedupe(poly: np.ndarray) -> np.ndarray:
    if len(poly) < 2:
        return poly
    scale = max(float(np.ptp(poly, axis=0).max()), 1.0)
    keep = [0]
    for i in range(1, len(poly)):
        if np.abs(poly[i] - poly[keep[-1]]).max() > GEOM_TOL * scale:
            keep.append(i)
    if len(keep) > 1 and np.abs(poly[keep[-1]] - poly[keep[0]]).max() <= GEOM_TOL * scale:
        keep.pop()
    return poly[keep]


def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def fan_triangulate(poly: np.ndarray, min_area: float = 0.0) -> list[np.ndarray]:
    """Split a convex polygon into triangles, dropping slivers below ``min_area``."""
    tris = []
    for i in range(1, len(poly) - 1):
        tri = np.array([poly[0], poly[i], poly[i + 1]])
        if area(tri) > min_area:
            tris.append(tri)
    return tris


def split_by_lines(tri: np.ndarray, lines) -> list[np.ndarray]:
    """Cut a triangle along straight lines ``a x + b y = c``.

    Returns sub-triangles covering the input whose interiors are not crossed
    by any line.
    """
    pieces = [np.asarray(tri, dtype=float)]
    diam = diameter(tri)
    tol = GEOM_TOL * diam
    for a, b, c in lines:
        normal = np.array([a, b], dtype=float)
        nn = float(np.hypot(a, b))
        if nn == 0.0:
            continue
        normal, c = normal / nn, c / nn
        nxt = []
        for poly in pieces:
            d = poly @ normal - c
            if d.min() >= -tol or d.max() <= tol:
                nxt.append(poly)
                continue
            lo = clip_halfplane(poly, normal, c)
            hi = clip_halfplane(poly, -normal, -c)
            for part in (lo, hi):
                if len(part) >= 3 and polygon_area(part) > tol * diam:
                    nxt.append(part)
        pieces = nxt
    out = []
    min_area = (GEOM_TOL * diam) ** 2
    for poly in pieces:
        out.extend(fan_triangulate(poly, min_area))
    return out


def segment_line_params(a: np.ndarray, b: np.ndarray, lines) -> list[float]:
    """Parameters t in (0, 1) where the segment a + t (b - a) crosses the lines."""
    ts = []
    d = b - a
    for la, lb, lc in lines:
        denom = la * d[0] + lb * d[1]
        if denom == 0.0:
            continue
        t = (lc - la * a[0] - lb * a[1]) / denom
        if GEOM_TOL < t < 1.0 - GEOM_TOL:
            ts.append(float(t))
    return sorted(ts)


def point_in_triangle(tri: np.ndarray, pts: np.ndarray, tol: float = GEOM_TOL) -> np.ndarray:
    ref = to_reference(tri, pts)
    return (ref[:, 0] >= -tol) & (ref[:, 1] >= -tol) & (ref.sum(axis=1) <= 1.0 + tol)
