"""Batch experiments behind the command line interface."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .approx import RDContext
from .errors import MeshError, RegressionViolation
from .localization import EXACT, full_report, pair_localization
from .mesh import Mesh, counterexample_mesh, load_mesh, rectangle_mesh
from .targets import TARGETS, make_target
from .tree import MAX_EXHAUSTIVE_BUDGET, exhaustive_best_tree, tree_approximate, uniform_trace

COUNTEREXAMPLE_SLACK = 1e-8
SLOPE_BAND = (-0.35, -0.15)
PAIR_SPREAD_LIMIT = 2.0
SWEEP_EPS = (1e0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
COUNTEREXAMPLE_EPS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
RATIO_NAMES = ("element_sum", "pair_sum", "minimal_pair_sum", "jump_augmented_sum",
               "trace_augmented_sum", "pair_sum_zero")


@dataclass
class ExperimentConfig:
    name: str
    eps: tuple[float, ...] = ()
    degrees: tuple[int, ...] = (1,)
    targets: tuple[str, ...] = ()
    rounds: int = 0
    budget: int = 64
    bc: str = "none"
    mesh_path: str | None = None
    out: str | None = None
    seed: int = 0

    def __post_init__(self):
        if any((not math.isfinite(e)) or e < 0 for e in self.eps):
            raise ValueError("epsilon values must be finite and >= 0")
        for t in self.targets:
            if t not in TARGETS:
                raise ValueError(f"unknown target {t!r}; choose from {', '.join(TARGETS)}")
        for d in self.degrees:
            if d not in (1, 2, 3):
                raise ValueError("degree must be 1, 2 or 3")


@dataclass
class ExperimentResult:
    tables: dict[str, str]
    summary: dict
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def write(self, out: str | os.PathLike) -> None:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        for name, text in self.tables.items():
            (path / name).write_text(text)
        (path / "summary.json").write_text(
            json.dumps({"schema": 1, **self.summary, "violations": self.violations},
                       indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def _csv(rows: list[dict], fields: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for k, v in r.items()})
    return buf.getvalue()


def _mesh(cfg: ExperimentConfig, default) -> Mesh:
    if cfg.mesh_path:
        return load_mesh(cfg.mesh_path)
    return default()


def _box(mesh: Mesh):
    pts = mesh.points[list(mesh.vertex_ids)]
    return (float(pts[:, 0].min()), float(pts[:, 0].max()),
            float(pts[:, 1].min()), float(pts[:, 1].max()))


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x)), np.log(np.asarray(y)), 1)[0])


def check_subordinate(mesh: Mesh, x0: float = 0.0) -> None:
    """Raise unless every element lies on one side of the line x = x0."""
    tol = 1e-12 * mesh.master.diameter
    for eid in mesh.leaves:
        xs = mesh.coords(eid)[:, 0] - x0
        if xs.min() < -tol and xs.max() > tol:
            raise MeshError(f"element {eid} straddles x = {x0}; mesh is not subordinate")


# ---------------------------------------------------------------------------
# baseline


def baseline_path() -> Path | None:
    env = os.environ.get("RDLOC_BASELINE")
    if env:
        return Path(env)
    ref = resources.files("rdloc") / "data" / "baseline.json"
    return Path(str(ref))


def load_baseline(path: Path | None = None) -> dict:
    path = baseline_path() if path is None else path
    if path is None or not Path(path).exists():
        return {}
    return json.loads(Path(path).read_text())


def _series_key(target: str, degree: int, bc: str, mesh_hash: str) -> str:
    return f"{target}|{degree}|{bc}|{mesh_hash}"


# ---------------------------------------------------------------------------
# counterexample


def run_counterexample(cfg: ExperimentConfig) -> ExperimentResult:
    eps = cfg.eps or COUNTEREXAMPLE_EPS
    positive = [e for e in eps if e > 0]
    if len(positive) < 2 or math.log10(max(positive) / min(positive)) < 3 - 1e-9:
        raise ValueError("the epsilon list must span at least 3 decades")
    mesh = _mesh(cfg, lambda: counterexample_mesh(rounds=cfg.rounds))
    check_subordinate(mesh)
    rows, violations = [], []
    by_degree: dict[int, list] = {}
    for degree in cfg.degrees:
        for e in eps:
            u = make_target("counterexample-u_eps", e)
            rep = pair_localization(u, mesh, RDContext(e, degree))
            bound = 16.0 / 3.0 * math.sqrt(e)
            elem_sq = sum(rep.element_errors.values())
            ok = elem_sq <= bound + COUNTEREXAMPLE_SLACK
            if not ok:
                violations.append(f"element sum {elem_sq:.6g} exceeds (16/3) sqrt(eps) = {bound:.6g} at eps={e:g}")
            row = {"epsilon": e, "degree": degree, "mesh_hash": rep.mesh_hash, "target": u.name,
                   "element_sum_sq": elem_sq, "bound": bound, "bound_ok": ok,
                   "element_sum": rep.element_sum, "pair_sum": rep.pair_sum,
                   "global_error": rep.global_error,
                   "element_ratio": rep.element_sum / rep.global_error,
                   "pair_ratio": rep.pair_sum / rep.global_error,
                   "blowup": rep.global_error / rep.element_sum}
            rows.append(row)
            by_degree.setdefault(degree, []).append(row)
    summary = {"experiment": "counterexample", "mesh_hash": mesh.hash(), "elements": len(mesh),
               "degrees": {}}
    for degree, rs in by_degree.items():
        xs = [r["epsilon"] for r in rs]
        info = {
            "slope_element_ratio": loglog_slope(xs, [r["element_ratio"] for r in rs]),
            "slope_blowup": loglog_slope(xs, [r["blowup"] for r in rs]),
            "pair_ratio_spread": max(r["pair_ratio"] for r in rs) / min(r["pair_ratio"] for r in rs),
        }
        lo, hi = SLOPE_BAND
        info["slope_ok"] = lo <= info["slope_blowup"] <= hi
        info["pair_spread_ok"] = info["pair_ratio_spread"] < PAIR_SPREAD_LIMIT
        if not info["slope_ok"]:
            violations.append(f"degree {degree}: blow-up slope {info['slope_blowup']:.3f} outside {SLOPE_BAND}")
        if not info["pair_spread_ok"]:
            violations.append(f"degree {degree}: pair ratio spread {info['pair_ratio_spread']:.3f} >= 2")
        summary["degrees"][str(degree)] = info
    fields = list(rows[0].keys())
    return ExperimentResult({"counterexample.csv": _csv(rows, fields)}, summary, violations)


# ---------------------------------------------------------------------------
# robustness sweep


def sweep_rows(cfg: ExperimentConfig, mesh: Mesh) -> list[dict]:
    eps = cfg.eps or SWEEP_EPS
    targets = cfg.targets or (("counterexample-u_eps", "smooth-sine") if cfg.bc == "none"
                              else ("boundary-layer", "smooth-bubble"))
    box = _box(mesh)
    rows = []
    for name in targets:
        for degree in cfg.degrees:
            for e in eps:
                u = make_target(name, e, degree, box, cfg.seed)
                rep = full_report(u, mesh, RDContext(e, degree, cfg.bc))
                cover = rep.covering_ok()
                row = {"target": name, "degree": degree, "epsilon": e, "bc": cfg.bc,
                       "mesh_hash": rep.mesh_hash, "global_error": rep.global_error,
                       "covering_ok": all(cover.values())}
                for q in RATIO_NAMES:
                    val = getattr(rep, q)
                    if val is None:
                        continue
                    row[q] = val
                    row[q.replace("_sum", "_ratio")] = rep.ratio(q)
                rows.append(row)
    return rows


def summarize_ratios(rows: list[dict]) -> dict:
    out: dict[str, dict] = {}
    for r in rows:
        key = _series_key(r["target"], r["degree"], r["bc"], r["mesh_hash"])
        series = out.setdefault(key, {})
        for q in RATIO_NAMES:
            rq = q.replace("_sum", "_ratio")
            v = r.get(rq)
            if v is None or v == EXACT:
                continue
            lo, hi = series.get(q, (math.inf, -math.inf))
            series[q] = (min(lo, v), max(hi, v))
    return {k: {q: [lo, hi] for q, (lo, hi) in s.items()} for k, s in out.items()}


def baseline_from_summary(summary: dict, margin: float = 1.1) -> dict:
    return {k: {q: [lo / margin, hi * margin] for q, (lo, hi) in s.items()}
            for k, s in summary.items()}


def check_against_baseline(summary: dict, baseline: dict) -> tuple[list[str], int]:
    violations, checked = [], 0
    ratios = baseline.get("ratios", {})
    for key, series in summary.items():
        ref = ratios.get(key)
        if ref is None:
            continue
        for q, (lo, hi) in series.items():
            if q not in ref:
                continue
            checked += 1
            blo, bhi = ref[q]
            if lo < blo or hi > bhi:
                violations.append(f"{key} {q}: observed [{lo:.4g}, {hi:.4g}] outside [{blo:.4g}, {bhi:.4g}]")
    return violations, checked


def run_robustness_sweep(cfg: ExperimentConfig, baseline: dict | None = None) -> ExperimentResult:
    mesh = _mesh(cfg, lambda: counterexample_mesh(rounds=cfg.rounds))
    rows = sweep_rows(cfg, mesh)
    summary_ratios = summarize_ratios(rows)
    violations = [f"covering inequality failed: {r['target']} degree {r['degree']} eps {r['epsilon']:g}"
                  for r in rows if not r["covering_ok"]]
    baseline = load_baseline() if baseline is None else baseline
    base_viol, checked = check_against_baseline(summary_ratios, baseline)
    violations += base_viol
    fields = ["target", "degree", "epsilon", "bc", "mesh_hash", "global_error", "covering_ok"]
    for q in RATIO_NAMES:
        fields += [q, q.replace("_sum", "_ratio")]
    summary = {"experiment": "sweep", "mesh_hash": mesh.hash(), "elements": len(mesh),
               "ratios": summary_ratios, "baseline_series_checked": checked}
    return ExperimentResult({"sweep.csv": _csv(rows, fields)}, summary, violations)


# ---------------------------------------------------------------------------
# tree study


def tree_root() -> Mesh:
    """Two triangles on (-2, 2) x (-1, 1) sharing the diagonal as refinement edge."""
    return rectangle_mesh(-2.0, 2.0, -1.0, 1.0, 1, 1)


def run_tree_study(cfg: ExperimentConfig) -> ExperimentResult:
    root = _mesh(cfg, tree_root)
    targets = cfg.targets or ("regularized-step",)
    eps = cfg.eps or (1e-4,)
    rows = []
    summary: dict = {"experiment": "tree", "root_hash": root.hash(), "runs": []}
    for name in targets:
        for degree in cfg.degrees:
            for e in eps:
                u = make_target(name, e, degree, _box(root), cfg.seed)
                ctx = RDContext(e, degree)
                res = tree_approximate(u, root, ctx, cfg.budget)
                uni = uniform_trace(u, root, ctx, max(cfg.budget, len(root)))
                base = {"target": name, "degree": degree, "epsilon": e, "mesh_hash": root.hash()}
                for r in res.trace:
                    rows.append({**base, "method": "adaptive", "step": r.step,
                                 "n_elements": r.n_elements, "E": r.E,
                                 "global_error": r.global_error,
                                 "selected_element": "" if r.selected is None else r.selected})
                for r in uni:
                    rows.append({**base, "method": "uniform", "step": r.step,
                                 "n_elements": r.n_elements, "E": r.E,
                                 "global_error": r.global_error, "selected_element": ""})
                if cfg.budget <= MAX_EXHAUSTIVE_BUDGET:
                    ex = exhaustive_best_tree(u, root, ctx, cfg.budget)
                    rows.append({**base, "method": "exhaustive", "step": 0,
                                 "n_elements": len(ex.mesh), "E": ex.E,
                                 "global_error": float("nan"), "selected_element": ""})
                summary["runs"].append({
                    **base, "final_elements": len(res.mesh), "final_E": res.E,
                    "final_error": res.trace[-1].global_error,
                    "e_evaluations": res.e_evaluations,
                    "subadditivity_violations": len(res.violations),
                })
    fields = ["target", "degree", "epsilon", "mesh_hash", "method", "step", "n_elements", "E",
              "global_error", "selected_element"]
    violations = [f"weak subadditivity violated in {r['target']}" for r in summary["runs"]
                  if r["subadditivity_violations"]]
    return ExperimentResult({"tree.csv": _csv(rows, fields)}, summary, violations)


# ---------------------------------------------------------------------------
# single report


def run_localize(cfg: ExperimentConfig) -> ExperimentResult:
    mesh = _mesh(cfg, lambda: counterexample_mesh(rounds=cfg.rounds))
    name = cfg.targets[0] if cfg.targets else "counterexample-u_eps"
    e = cfg.eps[0] if cfg.eps else 1e-2
    degree = cfg.degrees[0]
    u = make_target(name, e, degree, _box(mesh), cfg.seed)
    rep = full_report(u, mesh, RDContext(e, degree, cfg.bc))
    violations = [f"covering inequality '{k}' failed" for k, ok in rep.covering_ok().items() if not ok]
    return ExperimentResult({"report.csv": rep.to_csv()}, rep.summary(), violations)
