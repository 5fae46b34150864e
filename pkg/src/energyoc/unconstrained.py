"""Unconstrained energy-regularized problem: (M + rho K) u = load of the target."""

from __future__ import annotations

import numpy as np

from .assembly import Field, FEMSystem, prolong_interior
from .linsolve import DEFAULT_REL_TOL, SPDSolver
from .mesh import Mesh


def solve_unconstrained(
    mesh: Mesh,
    rho: float,
    target: Field,
    rel_tol: float = DEFAULT_REL_TOL,
    subdivisions: int | None = None,
    system: FEMSystem | None = None,
    method: str = "auto",
) -> np.ndarray:
    """Nodal values of the discrete minimizer, zero on the boundary."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    fem = system if system is not None else FEMSystem(mesh)
    if subdivisions is None:
        subdivisions = getattr(target, "quadrature_subdivisions", 1)
    load = fem.load(target, subdivisions)
    u = SPDSolver(fem.system_matrix(rho), rel_tol, method).solve(load)
    return prolong_interior(u, mesh)


def discrete_objective(fem: FEMSystem, rho: float, load: np.ndarray, u_int: np.ndarray) -> float:
    """Reduced cost up to the constant ||target||^2 / 2, on interior coefficients."""
    Bu = fem.M @ u_int + rho * (fem.K @ u_int)
    return 0.5 * float(u_int @ Bu) - float(load @ u_int)
