"""Oracle agreement checks on the 4x4 mesh, shared by the CLI and the test suite."""

from __future__ import annotations

import numpy as np

from .assembly import FEMSystem
from .control_vi import bound_moments, solve_control_constrained
from .mesh import build_structured_mesh
from .oracles import enumerate_box_qp, enumerate_flux_qp, random_control_instance, random_state_instance
from .state_vi import active_set_update, newton_step, partition, sample_interior, solve_state_constrained
from .linsolve import SPDSolver

AGREEMENT = 1e-8
NEWTON_AGREEMENT = 1e-10


def _setup(n=4):
    mesh = build_structured_mesh(n)
    fem = FEMSystem(mesh)
    return mesh, fem, mesh.spacing**2


def state_oracle_gap(rng, n=4) -> float:
    """Max-norm difference between the active-set solution and the enumeration oracle."""
    mesh, fem, rho = _setup(n)
    inst = random_state_instance(rng)
    sol = solve_state_constrained(mesh, rho, inst.target, inst.lower, inst.upper, system=fem, subdivisions=1)
    if not sol.report.converged:
        return np.inf
    ref = enumerate_box_qp(fem.system_matrix(rho), fem.load(inst.target, 1),
                           sample_interior(inst.lower, mesh), sample_interior(inst.upper, mesh))
    return float(np.max(np.abs(sol.u_int - ref)))


def control_oracle_gap(rng, n=4) -> float:
    mesh, fem, rho = _setup(n)
    inst = random_control_instance(rng)
    sol = solve_control_constrained(mesh, rho, inst.target, inst.lower, inst.upper, system=fem, subdivisions=1)
    if not sol.report.converged:
        return np.inf
    ref = enumerate_flux_qp(fem.system_matrix(rho), fem.K, fem.load(inst.target, 1),
                            bound_moments(inst.lower, mesh), bound_moments(inst.upper, mesh))
    return float(np.max(np.abs(sol.u_int - ref)))


def newton_update_gap(rng, n=4, c=1.0) -> float:
    """Distance between one slant-derivative Newton step and the active-set update from a random iterate."""
    mesh, fem, rho = _setup(n)
    inst = random_state_instance(rng)
    B = fem.system_matrix(rho)
    load = fem.load(inst.target, 1)
    lower = sample_interior(inst.lower, mesh)
    upper = sample_interior(inst.upper, mesh)
    u = rng.normal(scale=0.5, size=len(load))
    lam = rng.normal(scale=0.05, size=len(load))
    un, lamn = newton_step(B, load, lower, upper, u, lam, c)
    am, ap = partition(u, lam, lower, upper, c)
    ua, lama, _ = active_set_update(B, load, lower, upper, am, ap, lambda A: SPDSolver(A, 1e-14, "dense"))
    return float(max(np.max(np.abs(un - ua)), np.max(np.abs(lamn - lama))))


def run_checks(seed: int = 0, instances: int = 5):
    """List of ``(name, passed, detail)`` triples."""
    rng = np.random.default_rng(seed)
    out = []
    for name, fn, tol in (("state enumeration oracle", state_oracle_gap, AGREEMENT),
                          ("control enumeration oracle", control_oracle_gap, AGREEMENT),
                          ("newton step equals active-set update", newton_update_gap, NEWTON_AGREEMENT)):
        gaps = [fn(rng) for _ in range(instances)]
        worst = max(gaps)
        out.append((name, worst <= tol, f"max gap {worst:.3e} over {instances} instances (tol {tol:g})"))
    return out
