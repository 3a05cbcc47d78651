"""Hypothesis strategies and seeded builders shared by the test modules."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from rdloc.mesh import Mesh, bisect_conforming, rectangle_mesh


def random_mesh(rng: np.random.Generator, nx: int = 2, ny: int = 2, bisections: int = 8,
                box=(0.0, 2.0, 0.0, 2.0)) -> Mesh:
    """A structured mesh followed by bisections of randomly chosen leaves."""
    m = rectangle_mesh(*box, nx, ny, flip=bool(rng.integers(2)))
    for _ in range(bisections):
        m = bisect_conforming(m, m.leaves[int(rng.integers(len(m)))])
    return m


@st.composite
def meshes(draw, max_bisections: int = 6, max_cells: int = 3) -> Mesh:
    nx = draw(st.integers(1, max_cells))
    ny = draw(st.integers(1, 2))
    m = rectangle_mesh(0.0, float(nx), 0.0, float(ny), nx, ny, flip=draw(st.booleans()))
    for _ in range(draw(st.integers(0, max_bisections))):
        m = bisect_conforming(m, m.leaves[draw(st.integers(0, len(m) - 1))])
    return m


def random_polynomial(rng: np.random.Generator, degree: int):
    """Coefficients of a random bivariate polynomial and its value/gradient callables."""
    terms = [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]
    c = rng.normal(size=len(terms))

    def value(p):
        p = np.atleast_2d(p)
        return sum(ck * p[:, 0] ** i * p[:, 1] ** j for ck, (i, j) in zip(c, terms))

    def gradient(p):
        p = np.atleast_2d(p)
        gx = sum(ck * i * p[:, 0] ** max(i - 1, 0) * p[:, 1] ** j for ck, (i, j) in zip(c, terms) if i)
        gy = sum(ck * j * p[:, 0] ** i * p[:, 1] ** max(j - 1, 0) for ck, (i, j) in zip(c, terms) if j)
        return np.column_stack([gx + 0 * p[:, 0], gy + 0 * p[:, 0]])

    return value, gradient


def fe_target(mesh: Mesh, degree: int, rng: np.random.Generator, dirichlet: bool = False):
    """A random member of the finite element space, as a target and as coefficients."""
    from rdloc.approx import FEFunction, FESpace
    from rdloc.targets import DiscreteTarget

    space = FESpace(mesh, degree)
    c = rng.normal(size=space.n_dofs)
    if dirichlet:
        c[space.boundary] = 0.0
    fn = FEFunction(space, c)
    return DiscreteTarget.from_function(fn, degree, name="fe-member"), fn


def smooth_random_target(rng: np.random.Generator):
    """A seeded smooth target: a short random trigonometric sum plus a quadratic."""
    from rdloc.targets import AnalyticTarget

    k = rng.normal(scale=2.0, size=(3, 2))
    ph = rng.uniform(0, 2 * np.pi, 3)
    amp = rng.normal(size=3)
    q = rng.normal(size=3)

    def value(p):
        s = sum(a * np.sin(p @ kk + f) for a, kk, f in zip(amp, k, ph))
        return s + q[0] * p[:, 0] ** 2 + q[1] * p[:, 0] * p[:, 1] + q[2] * p[:, 1] ** 2

    def gradient(p):
        g = sum((a * np.cos(p @ kk + f))[:, None] * kk for a, kk, f in zip(amp, k, ph))
        return g + np.column_stack([2 * q[0] * p[:, 0] + q[1] * p[:, 1],
                                    q[1] * p[:, 0] + 2 * q[2] * p[:, 1]])

    return AnalyticTarget(value, gradient, name="random-smooth")
