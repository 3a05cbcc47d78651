"""Planar geometry helpers."""

import numpy as np
from hypothesis import given, settings, strategies as st
from shapely.geometry import LineString, Polygon
from shapely.ops import split

from rdloc.geometry import (area, clip_convex, inball_diameter, midpoint, polygon_area,
                            split_by_lines, to_reference, from_reference)

coord = st.floats(-5, 5, allow_nan=False)


@st.composite
def ccw_triangles(draw):
    pts = np.array([[draw(coord), draw(coord)] for _ in range(3)])
    a = 0.5 * np.linalg.det(np.column_stack([pts[1] - pts[0], pts[2] - pts[0]]))
    if abs(a) < 1e-2:
        pts = np.array([[0, 0], [1, 0], [0, 1]], float) + pts[0]
    elif a < 0:
        pts = pts[[0, 2, 1]]
    return pts


def test_inball_of_right_triangle() -> None:
    tri = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]])
    assert area(tri) == 6.0
    assert inball_diameter(tri) == 2.0  # inradius of the 3-4-5 triangle is 1


def test_midpoint_is_symmetric() -> None:
    a, b = np.array([0.1, 0.7]), np.array([-0.3, 1.9])
    assert np.array_equal(midpoint(a, b), midpoint(b, a))


@settings(max_examples=60, deadline=None)
@given(ccw_triangles(), st.floats(0, 1), st.floats(0, 1))
def test_reference_map_round_trip(tri, s, t) -> None:
    ref = np.array([[s * (1 - t), t]])
    assert np.allclose(to_reference(tri, from_reference(tri, ref)), ref, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(ccw_triangles(), ccw_triangles())
def test_clip_matches_shapely(a, b) -> None:
    got = polygon_area(clip_convex(a, b)) if len(clip_convex(a, b)) >= 3 else 0.0
    assert abs(got - Polygon(a).intersection(Polygon(b)).area) < 1e-9


@settings(max_examples=60, deadline=None)
@given(ccw_triangles(), st.floats(-1, 1), st.floats(-1, 1), st.floats(-3, 3))
def test_split_by_line_preserves_area_and_separates(tri, a, b, c) -> None:
    if abs(a) + abs(b) < 1e-3:
        return
    pieces = split_by_lines(tri, [(a, b, c)])
    assert abs(sum(area(p) for p in pieces) - area(tri)) < 1e-10 * max(1, area(tri))
    for p in pieces:
        side = p.mean(axis=0) @ np.array([a, b]) - c
        vals = p @ np.array([a, b]) - c
        assert np.all(vals * np.sign(side) >= -1e-9)
    big = 100.0
    if abs(b) > abs(a):
        line = LineString([(-big, (c + a * big) / b), (big, (c - a * big) / b)])
    else:
        line = LineString([((c + b * big) / a, -big), ((c - b * big) / a, big)])
    shapely_pieces = [g for g in split(Polygon(tri), line).geoms if g.area > 1e-12]
    assert len([p for p in pieces if area(p) > 1e-12]) >= len(shapely_pieces)
