"""Jacobi-preconditioned conjugate gradients for sparse SPD systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import SolverError


@dataclass(frozen=True)
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float


def pcg(A: sp.spmatrix, b: np.ndarray, rtol: float = 1e-12, maxiter: int | None = None,
        x0: np.ndarray | None = None) -> CGResult:
    """Solve A x = b; stop when ||b - A x|| <= rtol ||b||."""
    n = len(b)
    if n == 0:
        return CGResult(np.zeros(0), 0, 0.0)
    maxiter = 10 * n if maxiter is None else maxiter
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError("matrix has a non-positive diagonal entry")
    inv_diag = 1.0 / diag
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    k = 0
    res = float(np.linalg.norm(r))
    while res > rtol * bnorm:
        if k >= maxiter:
            raise SolverError(f"CG did not converge in {maxiter} iterations "
                              f"(relative residual {res / bnorm:.2e})")
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise SolverError("matrix is not positive definite")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        k += 1
        res = float(np.linalg.norm(r))
    return CGResult(x, k, res / bnorm)
