"""Dense SPD solves and the two end-to-end Galerkin solves."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .geometry import BoundaryMesh
from .operators import (
    CoefficientVector,
    GalerkinMatrix,
    assemble_rhs_hypsing,
    assemble_rhs_symm,
    assemble_stabilization,
    assemble_V,
    assemble_W,
    hat_integrals,
)
from .solutions import SingularSolution

__all__ = [
    "SolverError",
    "solve_spd",
    "galerkin_solve_symm",
    "galerkin_solve_hypsing",
    "SymmSolution",
    "HypsingSolution",
]


class SolverError(ArithmeticError):
    pass


def _first_bad_pivot(A: np.ndarray) -> int:
    """Index of the first non-positive pivot of an unpivoted LDL^T sweep."""
    A = np.array(A, dtype=float)
    n = len(A)
    for k in range(n):
        piv = A[k, k]
        if not piv > 0:
            return k
        col = A[k + 1 :, k] / piv
        A[k + 1 :, k + 1 :] -= np.outer(col, A[k, k + 1 :])
    return n - 1


def solve_spd(A, b) -> CoefficientVector | np.ndarray:
    """Solve ``A x = b`` by Cholesky.

    Parameters
    ----------
    A : GalerkinMatrix or ndarray
        Symmetric positive definite matrix.
    b : CoefficientVector or ndarray
        Right-hand side; the result has the same type.

    Raises
    ------
    SolverError
        If ``A`` is not positive definite; the message names the first
        non-positive pivot.
    """
    Av = np.asarray(A, dtype=float)
    bv = np.asarray(b, dtype=float)
    if Av.ndim != 2 or Av.shape[0] != Av.shape[1]:
        raise SolverError(f"matrix must be square, got shape {Av.shape}")
    if bv.shape != (Av.shape[0],):
        raise SolverError(f"right-hand side has shape {bv.shape}, expected ({Av.shape[0]},)")
    if not np.all(bv == 0):
        try:
            factor = cho_factor(Av, lower=True, check_finite=True)
        except LinAlgError:
            k = _first_bad_pivot(Av)
            raise SolverError(f"matrix is not positive definite: pivot {k} is non-positive") from None
        x = cho_solve(factor, bv)
    else:
        x = np.zeros_like(bv)
    if isinstance(b, CoefficientVector):
        return CoefficientVector(x, b.space, b.mesh)
    return x


class SymmSolution:
    """Piecewise-constant Galerkin solution with the system it came from."""

    def __init__(self, phi: CoefficientVector, V: GalerkinMatrix, rhs: CoefficientVector):
        self.phi = phi
        self.V = V
        self.rhs = rhs

    @property
    def values(self) -> np.ndarray:
        return self.phi.values

    def orthogonality_residual(self) -> float:
        """``max_j |<V phi_h, psi_j> - b_j| / ||b||``."""
        r = self.V.values @ self.phi.values - self.rhs.values
        scale = max(float(np.linalg.norm(self.rhs.values)), np.finfo(float).tiny)
        return float(np.max(np.abs(r)) / scale)


class HypsingSolution:
    """Nodal Galerkin solution of the stabilized hypersingular system."""

    def __init__(self, u: CoefficientVector, W: GalerkinMatrix, stab: GalerkinMatrix, rhs: CoefficientVector):
        self.u = u
        self.W = W
        self.stab = stab
        self.rhs = rhs

    @property
    def values(self) -> np.ndarray:
        return self.u.values

    def mean(self) -> float:
        """``<u_h, 1>`` over the boundary."""
        return float(hat_integrals(self.u.mesh) @ self.u.values)


def galerkin_solve_symm(m: BoundaryMesh, s: SingularSolution | Callable, V: GalerkinMatrix | None = None) -> SymmSolution:
    """Piecewise-constant approximation of the flux from the Dirichlet trace ``s``."""
    V = assemble_V(m) if V is None else V
    b = assemble_rhs_symm(m, s)
    phi = solve_spd(V, b)
    return SymmSolution(phi, V, b)


def galerkin_solve_hypsing(
    m: BoundaryMesh, flux: SingularSolution | Callable, V: GalerkinMatrix | None = None
) -> HypsingSolution:
    """Zero-mean piecewise-linear trace from the Neumann data ``flux``.

    ``flux`` is a :class:`SingularSolution` or a callable
    ``flux(points, normals)``.
    """
    W = assemble_W(m, V)
    S = assemble_stabilization(m)
    f = assemble_rhs_hypsing(m, flux)
    A = GalerkinMatrix(W.values + S.values, "P1", m)
    u = solve_spd(A, f)
    return HypsingSolution(u, W, S, f)
