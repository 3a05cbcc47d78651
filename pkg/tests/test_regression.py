"""Frozen regression constants measured on the reference configurations."""

from __future__ import annotations

import math

import pytest

from rdloc.approx import RDContext, global_best, quasi_interpolate
from rdloc.experiments import SWEEP_EPS, load_baseline, tree_root
from rdloc.localization import global_functional_E, pair_localization
from rdloc.mesh import counterexample_mesh
from rdloc.targets import make_target, smooth_target
from rdloc.tree import tree_approximate, uniform_trace

CONSTANTS = load_baseline()["constants"]


def test_tree_functional_tracks_global_error() -> None:
    lo, hi = CONSTANTS["E_ratio"]
    mesh = counterexample_mesh()
    for name in ("counterexample-u_eps", "smooth-sine"):
        for degree in (1, 2):
            for eps in SWEEP_EPS:
                u = make_target(name, eps, degree)
                ctx = RDContext(eps, degree)
                r = math.sqrt(global_functional_E(u, mesh, ctx)) / global_best(u, mesh, ctx).error
                assert lo <= r <= hi, (name, degree, eps, r)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_interpolation_constant_is_stable(degree) -> None:
    mesh = counterexample_mesh()
    ratios = []
    for eps in SWEEP_EPS:
        u = smooth_target()
        ctx = RDContext(eps, degree)
        err = math.sqrt(quasi_interpolate(u, mesh, ctx).error_sq(u, eps))
        ratios.append(err / pair_localization(u, mesh, ctx).pair_sum)
    assert max(ratios) <= CONSTANTS["interpolation_C_obs"]
    # within +-20% of one common value
    assert max(ratios) / min(ratios) <= 1.2 / 0.8


@pytest.fixture(scope="module")
def adaptive_vs_uniform():
    root = tree_root()
    out = {}
    for name, eps in (("smooth-sine", 1e-2), ("regularized-step", 1e-4)):
        u = make_target(name, eps)
        ctx = RDContext(eps, 1)
        res = tree_approximate(u, root, ctx, 512)
        uniform = {r.n_elements: r.global_error for r in uniform_trace(u, root, ctx, 512)}
        out[name] = {}
        for n, err in uniform.items():
            row = next(r for r in res.trace if r.n_elements >= n)
            out[name][n] = row.global_error / err
    return out


def test_smooth_target_adaptive_matches_uniform(adaptive_vs_uniform) -> None:
    ratios = adaptive_vs_uniform["smooth-sine"]
    assert all(0.8 <= r <= 1.3 for r in ratios.values()), ratios


def test_step_target_adaptive_beats_uniform(adaptive_vs_uniform) -> None:
    ratios = adaptive_vs_uniform["regularized-step"]
    assert ratios[256] <= CONSTANTS["tree_step_ratio_256"]
    assert ratios[512] <= 0.5


@pytest.mark.xfail(strict=True, reason="the advantage reaches a factor 2 only from 512 elements "
                   "on this root; at 64, 128, 256 the ratio is about 0.90, 0.65, 0.51")
def test_step_target_halves_error_from_64(adaptive_vs_uniform) -> None:
    ratios = adaptive_vs_uniform["regularized-step"]
    assert all(r <= 0.5 for n, r in ratios.items() if n >= 64), ratios
