"""Piecewise constant control from a computed state.

The control ``z_H`` on the coarse mesh and the auxiliary ``p_h`` on the
fine mesh solve the mixed system

    Bh' p = Bh' u,    K p = Bh z,

with ``Bh[j, l] = (psi_l, phi_j)``. Eliminating ``p = K^{-1} Bh z`` gives the
Schur complement system ``Bh' K^{-1} Bh z = Bh' u``, solved here by outer CG
with an inner solve per operator application. It is uniquely solvable when
the state mesh is sufficiently finer than the control mesh (h = H/4 here).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import FEMSystem, assemble_load, assemble_mixed_mass, prolong_interior, restrict_interior
from .linsolve import SolverError, SPDSolver, cg
from .mesh import Mesh

OUTER_TOL = 1e-10
INNER_TOL = 1e-12


class SchurOperator:
    """``y -> Bh' K^{-1} Bh y`` on coarse element vectors.

    ``inner`` selects the stiffness solve: ``"pcg"`` (nested CG) or
    ``"direct"`` (sparse LU factorization computed once).
    """

    def __init__(self, fine: Mesh, coarse: Mesh, inner_tol: float = INNER_TOL,
                 inner: str = "pcg", system: FEMSystem | None = None):
        self.fine = fine
        self.coarse = coarse
        fem = system if system is not None else FEMSystem(fine)
        self.K = fem.K
        self.Bh = restrict_interior(assemble_mixed_mass(fine, coarse), fine)
        self.BhT = self.Bh.T.tocsr()
        self.inner = inner
        self.inner_iterations = 0
        self.applications = 0
        if inner == "direct":
            self._lu = spla.splu(sp.csc_matrix(self.K))
        elif inner == "pcg":
            self._solver = SPDSolver(self.K, inner_tol, "pcg")
        else:
            raise ValueError(f"unknown inner solver {inner!r}")

    @property
    def shape(self):
        n = self.Bh.shape[1]
        return (n, n)

    def solve_stiffness(self, b: np.ndarray) -> np.ndarray:
        if self.inner == "direct":
            return self._lu.solve(b)
        x = self._solver.solve(b)
        self.inner_iterations = self._solver.iterations
        return x

    def lift(self, y: np.ndarray) -> np.ndarray:
        """``p = K^{-1} Bh y`` on interior fine nodes."""
        return self.solve_stiffness(self.Bh @ y)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        self.applications += 1
        return self.BhT @ self.lift(y)


def reconstruct_control(
    u: np.ndarray,
    fine: Mesh,
    coarse: Mesh,
    rel_tol: float = OUTER_TOL,
    inner_tol: float = INNER_TOL,
    inner: str = "pcg",
    operator: SchurOperator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Coarse element values ``z`` and the fine nodal auxiliary ``p`` (boundary zero).

    ``u`` holds nodal values on all fine nodes.
    """
    S = operator if operator is not None else SchurOperator(fine, coarse, inner_tol, inner)
    u_int = restrict_interior(np.asarray(u, dtype=float), fine)
    rhs = S.BhT @ u_int
    n = S.shape[0]
    if not np.any(rhs):
        return np.zeros(n), np.zeros(fine.n_nodes)
    try:
        z, _ = cg(S, rhs, rel_tol, max_iter=10 * n)
    except SolverError as exc:
        raise SolverError(
            "Schur complement CG failed; the state mesh may be too coarse relative to the control mesh",
            exc.residual,
            exc.iterations,
        ) from exc
    p = S.lift(z)
    return z, prolong_interior(p, fine)


def discrete_dual_norm(moments: np.ndarray, K_int, rel_tol: float = INNER_TOL, method: str = "auto") -> float:
    """``sqrt(b' K^{-1} b)``: the dual norm of the functional with moments ``b`` on V_h."""
    b = np.asarray(moments, dtype=float)
    if not np.any(b):
        return 0.0
    x = SPDSolver(K_int, rel_tol, method).solve(b)
    return float(np.sqrt(max(b @ x, 0.0)))


def control_error_dual(z: np.ndarray, exact, fine: Mesh, coarse: Mesh,
                       subdivisions: int = 4, system: FEMSystem | None = None) -> float:
    """Discrete H^{-1} distance between a coarse piecewise constant control and an exact field."""
    fem = system if system is not None else FEMSystem(fine)
    exact_moments = restrict_interior(assemble_load(fine, exact, subdivisions=subdivisions), fine)
    Bh = restrict_interior(assemble_mixed_mass(fine, coarse), fine)
    return discrete_dual_norm(exact_moments - Bh @ z, fem.K)
