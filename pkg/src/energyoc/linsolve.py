"""Sparse SPD solves: Jacobi-preconditioned conjugate gradients with a dense fallback."""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

DEFAULT_REL_TOL = 1e-10
DENSE_LIMIT = 500


class SolverError(RuntimeError):
    """Raised when an iterative solve does not reach its tolerance."""

    def __init__(self, message: str, residual: float = np.nan, iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def cg(
    matvec: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    rel_tol: float = DEFAULT_REL_TOL,
    max_iter: int | None = None,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    x0: np.ndarray | None = None,
    callback: Callable[[np.ndarray], None] | None = None,
) -> tuple[np.ndarray, int]:
    """Preconditioned conjugate gradients for an SPD operator.

    Stops once ``||b - A x||_2 <= rel_tol * ||b||_2``. ``callback`` receives
    every iterate, starting with the initial guess.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if max_iter is None:
        max_iter = 10 * max(n, 1)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n), 0
    r = b - matvec(x) if x0 is not None else b.copy()
    target = rel_tol * bnorm
    if callback is not None:
        callback(x)
    rnorm = np.linalg.norm(r)
    if rnorm <= target:
        return x, 0
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = matvec(p)
        pAp = p @ Ap
        if pAp <= 0.0:
            raise SolverError("operator is not positive definite", rnorm / bnorm, it)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if callback is not None:
            callback(x)
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            return x, it
        z = precond(r) if precond is not None else r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise SolverError(
        f"CG did not converge in {max_iter} iterations (relative residual {rnorm / bnorm:.3e})",
        rnorm / bnorm,
        max_iter,
    )


def solve_dense(A, b: np.ndarray) -> np.ndarray:
    """Cholesky solve on the dense matrix; meant for small systems and test oracles."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    return sla.cho_solve(sla.cho_factor(A), b)


def solve_spd(
    A,
    b: np.ndarray,
    rel_tol: float = DEFAULT_REL_TOL,
    max_iter: int | None = None,
    callback=None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """Jacobi-PCG solve of ``A x = b``; returns ``(x, iterations)``."""
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    A = sp.csr_matrix(A)
    d = A.diagonal()
    if np.any(d <= 0.0):
        raise SolverError("non-positive diagonal entry, matrix is not SPD")
    inv_d = 1.0 / d
    return cg(A.dot, b, rel_tol, max_iter, precond=lambda r: inv_d * r, x0=x0, callback=callback)


def apply_inverse(A, B, y: np.ndarray, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """``A^{-1} (B y)`` with the inner solve at ``rel_tol``."""
    rhs = B @ np.asarray(y, dtype=float)
    x, _ = solve_spd(A, rhs, rel_tol)
    return x


class SPDSolver:
    """Reusable solver for one SPD matrix.

    ``method`` is ``"pcg"`` (Jacobi-PCG), ``"dense"`` (Cholesky) or
    ``"auto"``, which picks the dense path for at most ``DENSE_LIMIT``
    unknowns.
    """

    def __init__(self, A, rel_tol: float = DEFAULT_REL_TOL, method: str = "pcg"):
        self.A = sp.csr_matrix(A)
        self.rel_tol = rel_tol
        n = self.A.shape[0]
        if method == "auto":
            method = "dense" if n <= DENSE_LIMIT else "pcg"
        if method not in ("pcg", "dense"):
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self.iterations = 0
        if method == "dense":
            self._factor = sla.cho_factor(self.A.toarray())

    def solve(self, b: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
        if self.method == "dense":
            return sla.cho_solve(self._factor, b)
        x, it = solve_spd(self.A, b, self.rel_tol, x0=x0)
        self.iterations += it
        return x
