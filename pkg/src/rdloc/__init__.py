"""Localization of best finite element errors in the reaction-diffusion norm."""

from .approx import (BestApproximation, FEFunction, FESpace, PatchFunction, RDContext,
                     best_on_element, best_on_patch, best_seminorm_on_patch, dual_eval,
                     global_best, quasi_interpolate)
from .errors import (BoundaryTraceError, ClosureError, DegenerateGeometryError, MeshError,
                     NegativeErrorSquared, RdlocError, RegressionViolation, SolverError)
from .localization import (LocalizationReport, dirichlet_pair_localization, error_functional_e,
                           full_report, global_functional_E, jump_augmented, pair_localization,
                           trace_augmented)
from .mesh import (Mesh, MeshStats, Patch, bisect_conforming, counterexample_mesh, mesh_stats,
                   minimal_pair, pair, read_mesh, rectangle_mesh, uniform_refine, write_mesh)
from .targets import AnalyticTarget, DiscreteTarget, make_target
from .tree import exhaustive_best_tree, tree_approximate

__version__ = "0.1.0"
