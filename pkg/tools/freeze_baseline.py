"""Measure the regression constants once and write src/rdloc/data/baseline.json.

Every frozen interval is the observed range widened by MARGIN on both ends.
Run from the repository root:  python3 tools/freeze_baseline.py
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from rdloc.approx import RDContext, quasi_interpolate
from rdloc.experiments import (SWEEP_EPS, ExperimentConfig, baseline_from_summary,
                               summarize_ratios, sweep_rows, tree_root)
from rdloc.localization import full_report, global_functional_E, pair_localization
from rdloc.mesh import counterexample_mesh
from rdloc.targets import make_target, smooth_target
from rdloc.tree import exhaustive_best_tree, tree_approximate, uniform_trace

MARGIN = 1.1
OUT = Path(__file__).resolve().parent.parent / "src" / "rdloc" / "data" / "baseline.json"


def jump_and_E(mesh):
    lo, hi = math.inf, 0.0
    elo, ehi = math.inf, 0.0
    for name in ("counterexample-u_eps", "smooth-sine"):
        for degree in (1, 2):
            for eps in SWEEP_EPS:
                u = make_target(name, eps, degree)
                ctx = RDContext(eps, degree)
                rep = full_report(u, mesh, ctx)
                for f, p in rep.pair_errors.items():
                    if p <= 1e-20 * rep.norm**2:
                        continue
                    q = rep.jump_terms[f] / p
                    lo, hi = min(lo, q), max(hi, q)
                r = math.sqrt(global_functional_E(u, mesh, ctx)) / rep.global_error
                elo, ehi = min(elo, r), max(ehi, r)
    return max(hi, 1.0 / lo), (elo, ehi)


def interpolation_constant(mesh):
    worst = 0.0
    for degree in (1, 2, 3):
        for eps in SWEEP_EPS:
            u = smooth_target()
            ctx = RDContext(eps, degree)
            err = math.sqrt(quasi_interpolate(u, mesh, ctx).error_sq(u, eps))
            worst = max(worst, err / pair_localization(u, mesh, ctx).pair_sum)
    return worst


def tree_constants():
    root = tree_root()
    u = make_target("regularized-step", 1e-4)
    ctx = RDContext(1e-4, 1)
    c_nb = 0.0
    for n in range(len(root), 13):
        alg = tree_approximate(u, root, ctx, n, track_global=False)
        best = exhaustive_best_tree(u, root, ctx, math.ceil(n / 2))
        c_nb = max(c_nb, alg.E / best.E)
    res = tree_approximate(u, root, ctx, 256)
    c1 = res.e_evaluations / (len(res.mesh) + len(root))
    uni = {r.n_elements: r.global_error for r in uniform_trace(u, root, ctx, 256)}
    ad = next(r for r in res.trace if r.n_elements >= 256)
    return c_nb, c1, ad.global_error / uni[256]


def main():
    mesh = counterexample_mesh()
    ratios = {}
    for bc in ("none", "dirichlet"):
        rows = sweep_rows(ExperimentConfig("sweep", degrees=(1, 2), bc=bc), mesh)
        ratios.update(baseline_from_summary(summarize_ratios(rows), MARGIN))
    jump_r, e_ratio = jump_and_E(mesh)
    c_obs = interpolation_constant(mesh)
    c_nb, c1, step_ratio = tree_constants()
    baseline = {
        "schema": 1,
        "margin": MARGIN,
        "ratios": ratios,
        "constants": {
            "jump_R": jump_r * MARGIN,
            "E_ratio": [e_ratio[0] / MARGIN, e_ratio[1] * MARGIN],
            "interpolation_C_obs": c_obs * MARGIN,
            "tree_C_nb": c_nb * MARGIN,
            "tree_c1": c1 * MARGIN,
            "tree_step_ratio_256": step_ratio * MARGIN,
        },
        "observed": {
            "jump_R": jump_r, "E_ratio": list(e_ratio), "interpolation_C_obs": c_obs,
            "tree_C_nb": c_nb, "tree_c1": c1, "tree_step_ratio_256": step_ratio,
        },
    }
    OUT.write_text(json.dumps(baseline, indent=2, sort_keys=True) + "\n")
    print(json.dumps(baseline["observed"], indent=2))


if __name__ == "__main__":
    main()
