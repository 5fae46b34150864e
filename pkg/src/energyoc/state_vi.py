"""Pointwise state constraints g_- <= u <= g_+ solved by the primal-dual active set method.

The discrete problem is the first kind variational inequality for
``B = M + rho K`` over the box of nodal barrier values. With the multiplier
``lam = B u - load`` the optimality system reads

    F1 = B u - lam - load = 0,
    F2 = lam - min(0, lam + c (g_+ - u)) - max(0, lam + c (g_- - u)) = 0,

and one semi-smooth Newton step on (F1, F2) is exactly one active-set update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import Field, FEMSystem, prolong_interior
from .linsolve import DEFAULT_REL_TOL, SPDSolver
from .mesh import Mesh
from .report import SolveReport


@dataclass
class StateVISolution:
    u: np.ndarray  # all nodes, zero on the boundary
    lam: np.ndarray  # interior multiplier B u - load
    report: SolveReport
    active_minus: np.ndarray  # positions in the interior ordering
    active_plus: np.ndarray
    lower: np.ndarray  # nodal barrier values on interior nodes
    upper: np.ndarray
    u_int: np.ndarray


def sample_interior(g, mesh: Mesh) -> np.ndarray:
    """Nodal values of a field (or pass through an interior-length array)."""
    if callable(g):
        xy = mesh.nodes[mesh.interior]
        return np.broadcast_to(np.asarray(g(xy[:, 0], xy[:, 1]), dtype=float), (len(xy),)).copy()
    g = np.asarray(g, dtype=float)
    if g.shape == (mesh.n_nodes,):
        return g[mesh.interior].copy()
    return g


def partition(u, lam, lower, upper, c):
    """Active-set partition from the predictors ``lam + c (g -/+ - u)``.

    Returns boolean masks ``(lower_active, upper_active)``; everything else is inactive.
    """
    y_plus = lam + c * (upper - u)
    y_minus = lam + c * (lower - u)
    return y_minus > 0.0, y_plus < 0.0


def feasibility_violation(u, lower, upper) -> float:
    """Largest nodal barrier violation, zero for a feasible state."""
    over = np.max(u - upper, initial=0.0)
    under = np.max(lower - u, initial=0.0)
    return float(max(over, under, 0.0))


def complementarity_map(u, lam, lower, upper, c):
    return lam - np.minimum(0.0, lam + c * (upper - u)) - np.maximum(0.0, lam + c * (lower - u))


def multiplier_signs_ok(lam, act_minus, act_plus, rel: float = 1e-8) -> bool:
    """Sign certificate ``lam >= 0`` on the lower and ``lam <= 0`` on the upper active set.

    Together with feasibility it certifies a KKT point even when degenerate
    indices (zero multiplier on the bound) keep flipping between sets.
    """
    eps = rel * (1.0 + np.max(np.abs(lam), initial=0.0))
    return bool(np.all(lam[act_minus] >= -eps) and np.all(lam[act_plus] <= eps))


def active_set_update(B, load, lower, upper, act_minus, act_plus, solver_factory, u_guess=None):
    """Solve ``B u - lam = load`` with u fixed on the active sets and lam = 0 elsewhere."""
    n = len(load)
    active = act_minus | act_plus
    u = np.where(act_minus, lower, np.where(act_plus, upper, 0.0))
    inact = np.flatnonzero(~active)
    lin_its = 0
    if len(inact):
        B = sp.csr_matrix(B)
        B_II = B[inact][:, inact]
        rhs = load[inact] - B[inact] @ u
        solver = solver_factory(B_II)
        x0 = None if u_guess is None else u_guess[inact]
        u[inact] = solver.solve(rhs, x0=x0)
        lin_its = solver.iterations
    lam = np.zeros(n)
    act = np.flatnonzero(active)
    if len(act):
        lam[act] = (sp.csr_matrix(B)[act] @ u) - load[act]
    return u, lam, lin_its


def newton_step(B, load, lower, upper, u, lam, c):
    """One explicit semi-smooth Newton step on (F1, F2) using slant derivatives of min/max."""
    n = len(u)
    y_plus = lam + c * (upper - u)
    y_minus = lam + c * (lower - u)
    d = (y_plus < 0.0).astype(float) + (y_minus > 0.0).astype(float)
    B = sp.csr_matrix(B)
    F1 = B @ u - lam - load
    F2 = lam - np.minimum(0.0, y_plus) - np.maximum(0.0, y_minus)
    J = sp.bmat(
        [[B, -sp.identity(n)], [sp.diags(c * d), sp.diags(1.0 - d)]],
        format="csc",
    )
    step = spla.spsolve(J, np.concatenate([F1, F2]))
    return u - step[:n], lam - step[n:]


def solve_state_constrained(
    mesh: Mesh,
    rho: float,
    target: Field,
    g_minus,
    g_plus,
    c: float = 1.0,
    tol: float = 1e-5,
    max_iter: int = 100,
    rel_tol: float = DEFAULT_REL_TOL,
    method: str = "auto",
    system: FEMSystem | None = None,
    subdivisions: int | None = None,
) -> StateVISolution:
    """Active-set iteration started from the unconstrained solution and ``lam = 0``.

    Terminates when the nodal barrier violation is below ``tol`` and either
    the active sets reproduce the ones that generated the current iterate or
    the multiplier has the right sign on them (a KKT certificate).
    Exceeding ``max_iter`` yields ``report.converged = False``.
    """
    if rho <= 0 or c <= 0:
        raise ValueError("rho and c must be positive")
    fem = system if system is not None else FEMSystem(mesh)
    if subdivisions is None:
        subdivisions = getattr(target, "quadrature_subdivisions", 1)
    load = fem.load(target, subdivisions)
    lower = sample_interior(g_minus, mesh)
    upper = sample_interior(g_plus, mesh)
    if np.any(lower >= upper):
        raise ValueError("barriers must satisfy g_- < g_+ at every interior node")
    if np.any(lower > 0.0) or np.any(upper < 0.0):
        raise ValueError("barriers must admit the zero state (g_- <= 0 <= g_+)")

    B = fem.system_matrix(rho)

    def factory(A):
        return SPDSolver(A, rel_tol, method)

    u = factory(B).solve(load)
    lam = np.zeros_like(u)
    report = SolveReport(False, 0, tol=tol, c=c, rel_tol=rel_tol)
    prev = None
    for m in range(max_iter + 1):
        act_minus, act_plus = partition(u, lam, lower, upper, c)
        done = prev is not None and (
            (np.array_equal(prev[0], act_minus) and np.array_equal(prev[1], act_plus))
            or multiplier_signs_ok(lam, *prev)
        )
        if done and feasibility_violation(u, lower, upper) < tol:
            report.converged = True
            break
        if m == max_iter:
            report.message = f"active-set iteration did not converge in {max_iter} updates"
            break
        u, lam, its = active_set_update(B, load, lower, upper, act_minus, act_plus, factory, u)
        report.iterations += 1
        report.linear_iterations += its
        report.active_sizes.append((int(act_minus.sum()), int(act_plus.sum())))
        prev = (act_minus, act_plus)

    report.feasibility = feasibility_violation(u, lower, upper)
    report.complementarity = float(np.max(np.abs(complementarity_map(u, lam, lower, upper, c)), initial=0.0))
    report.residual = float(np.max(np.abs(B @ u - lam - load), initial=0.0))
    return StateVISolution(
        u=prolong_interior(u, mesh),
        lam=lam,
        report=report,
        active_minus=np.flatnonzero(prev[0]) if prev else np.array([], dtype=int),
        active_plus=np.flatnonzero(prev[1]) if prev else np.array([], dtype=int),
        lower=lower,
        upper=upper,
        u_int=u,
    )


def complementarity_residual(sol: StateVISolution, g_minus=None, g_plus=None, mesh: Mesh | None = None) -> float:
    """Max-norm of F2 at the solution; barriers default to the ones used by the solve."""
    lower = sol.lower if g_minus is None else _barrier(g_minus, mesh, sol)
    upper = sol.upper if g_plus is None else _barrier(g_plus, mesh, sol)
    r = complementarity_map(sol.u_int, sol.lam, lower, upper, sol.report.c)
    return float(np.max(np.abs(r), initial=0.0))


def _barrier(g, mesh, sol):
    if callable(g):
        if mesh is None:
            raise ValueError("a mesh is needed to sample barrier functions")
        return sample_interior(g, mesh)
    g = np.asarray(g, dtype=float)
    return np.broadcast_to(g, sol.lam.shape)
