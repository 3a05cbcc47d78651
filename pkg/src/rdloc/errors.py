"""Exception hierarchy."""


class RdlocError(Exception):
    """Base class for all errors raised by rdloc."""


class MeshError(RdlocError, ValueError):
    """Invalid mesh, unknown element/face, or failed conformity audit."""


class ClosureError(MeshError):
    """Conforming closure did not terminate within the cascade budget."""


class DegenerateGeometryError(RdlocError, ValueError):
    """Triangle or patch with (numerically) vanishing area."""


class SolverError(RdlocError, RuntimeError):
    """Linear solve failed (non-SPD local matrix, CG non-convergence, ...)."""


class NegativeErrorSquared(SolverError):
    """A squared error came out below the roundoff clamp of -1e-12."""


class BoundaryTraceError(RdlocError, ValueError):
    """Target does not vanish on the boundary in Dirichlet mode."""


class RegressionViolation(RdlocError):
    """A measured ratio left its frozen regression interval."""
