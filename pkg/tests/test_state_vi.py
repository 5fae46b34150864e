import numpy as np
import pytest
from hypothesis import given, strategies as st

from energyoc.assembly import FEMSystem
from energyoc.linsolve import SPDSolver
from energyoc.mesh import build_structured_mesh
from energyoc.oracles import enumerate_box_qp, random_state_instance
from energyoc.state_vi import (
    active_set_update,
    complementarity_residual,
    feasibility_violation,
    multiplier_signs_ok,
    newton_step,
    partition,
    sample_interior,
    solve_state_constrained,
)
from energyoc.targets import TargetSpec, constant, preset_constraints
from energyoc.unconstrained import discrete_objective, solve_unconstrained


def setup(n):
    m = build_structured_mesh(n)
    return m, FEMSystem(m), m.spacing**2


def test_inactive_constraints():
    m, fem, rho = setup(16)
    t = TargetSpec("u1")
    sol = solve_state_constrained(m, rho, t, constant(-1e9), constant(1e9), system=fem)
    assert sol.report.converged and sol.report.iterations == 1
    np.testing.assert_array_equal(sol.lam, 0.0)
    np.testing.assert_allclose(sol.u, solve_unconstrained(m, rho, t, system=fem), atol=1e-12)
    assert complementarity_residual(sol) == 0.0


def test_enumeration_oracle_preset():
    m, fem, rho = setup(4)
    t = TargetSpec("u1")
    g = preset_constraints("g1")
    sol = solve_state_constrained(m, rho, t, g.lower, g.upper, system=fem)
    ref = enumerate_box_qp(fem.system_matrix(rho), fem.load(t, 1),
                           sample_interior(g.lower, m), sample_interior(g.upper, m))
    assert np.max(np.abs(sol.u_int - ref)) < 1e-8


def test_solution_invariants():
    m, fem, rho = setup(32)
    t = TargetSpec("u2")
    g = preset_constraints("g1")
    sol = solve_state_constrained(m, rho, t, g.lower, g.upper, system=fem)
    r = sol.report
    assert r.converged
    lower, upper = sol.lower, sol.upper
    assert np.all(sol.u_int <= upper + r.tol) and np.all(sol.u_int >= lower - r.tol)
    inactive = np.setdiff1d(np.arange(len(sol.lam)), np.union1d(sol.active_minus, sol.active_plus))
    np.testing.assert_array_equal(sol.lam[inactive], 0.0)
    assert np.all(sol.lam[sol.active_plus] <= r.tol)
    assert np.all(sol.lam[sol.active_minus] >= -r.tol)
    B = fem.system_matrix(rho)
    load = fem.load(t, 4)
    scale = 1 + np.max(np.abs(load))
    assert np.max(np.abs(B @ sol.u_int - sol.lam - load)) <= 1e-8 * scale
    assert complementarity_residual(sol) <= 1e-8 * (1 + np.max(np.abs(sol.lam)))
    assert np.all(sol.u[m.boundary_mask] == 0)


def test_complementarity_detects_violation():
    m, fem, rho = setup(4)
    sol = solve_state_constrained(m, rho, TargetSpec("u1"), constant(-1.0), constant(1.0), system=fem)
    assert complementarity_residual(sol) == 0.0
    sol.u_int[:] = 2.0  # above the upper barrier
    sol.lam[:] = 0.5
    assert complementarity_residual(sol) > 0


def test_invalid_barriers():
    m, fem, rho = setup(4)
    with pytest.raises(ValueError):
        solve_state_constrained(m, rho, TargetSpec("u1"), constant(1.0), constant(1.0))
    with pytest.raises(ValueError):
        solve_state_constrained(m, rho, TargetSpec("u1"), constant(0.1), constant(1.0))
    with pytest.raises(ValueError):
        solve_state_constrained(m, rho, TargetSpec("u1"), constant(-1.0), constant(1.0), c=0.0)


def test_nonconvergence_is_reported():
    m, fem, rho = setup(32)
    g = preset_constraints("g1")
    sol = solve_state_constrained(m, rho, TargetSpec("u2"), g.lower, lambda x, y: 0.05 + 0 * x,
                                  max_iter=1, system=fem)
    assert not sol.report.converged
    assert "did not converge" in sol.report.message


def test_objective_dominance():
    m, fem, rho = setup(16)
    t = TargetSpec("u1")
    load = fem.load(t, 1)
    g = preset_constraints("g1")
    sol = solve_state_constrained(m, rho, t, g.lower, g.upper, system=fem)
    u0 = solve_unconstrained(m, rho, t, system=fem)[m.interior]
    assert discrete_objective(fem, rho, load, sol.u_int) > discrete_objective(fem, rho, load, u0)


def test_symmetry():
    m, fem, rho = setup(16)
    g = preset_constraints("g1")
    sol = solve_state_constrained(m, rho, TargetSpec("u1"), g.lower, g.upper, system=fem, rel_tol=1e-13)
    grid = sol.u.reshape(17, 17)
    assert np.max(np.abs(grid - grid.T)) < 1e-10


def test_c_independence():
    m, fem, rho = setup(16)
    t = TargetSpec("u2")
    g = preset_constraints("g2")
    sols = [solve_state_constrained(m, rho, t, g.lower, lambda x, y: 0.3 * t(x, y), c=c,
                                    system=fem, rel_tol=1e-13) for c in (0.1, 1.0, 100.0)]
    for s in sols:
        assert s.report.converged
    for s in sols[1:]:
        assert np.max(np.abs(s.u - sols[0].u)) < 1e-8


def test_newton_step_equals_update(rng):
    m, fem, rho = setup(4)
    B = fem.system_matrix(rho)
    for _ in range(5):
        inst = random_state_instance(rng)
        load = fem.load(inst.target, 1)
        lo, hi = sample_interior(inst.lower, m), sample_interior(inst.upper, m)
        u = rng.normal(scale=0.5, size=9)
        lam = rng.normal(scale=0.05, size=9)
        c = rng.uniform(0.1, 10)
        un, ln = newton_step(B, load, lo, hi, u, lam, c)
        am, ap = partition(u, lam, lo, hi, c)
        ua, la, _ = active_set_update(B, load, lo, hi, am, ap, lambda A: SPDSolver(A, method="dense"))
        assert np.max(np.abs(un - ua)) <= 1e-10
        assert np.max(np.abs(ln - la)) <= 1e-10


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.01, 100))
def test_partition_cases(u, lam, c):
    lo, hi = np.array([-0.5]), np.array([0.5])
    am, ap = partition(np.array([u]), np.array([lam]), lo, hi, c)
    # lower and upper activation are exclusive because g- < g+
    assert not (am[0] and ap[0])
    assert am[0] == (lam + c * (lo[0] - u) > 0)
    assert ap[0] == (lam + c * (hi[0] - u) < 0)


def test_helpers():
    assert feasibility_violation(np.array([0.0, 1.2]), np.zeros(2), np.ones(2)) == pytest.approx(0.2)
    assert feasibility_violation(np.array([0.5]), np.zeros(1), np.ones(1)) == 0.0
    assert multiplier_signs_ok(np.array([1.0, -1.0]), np.array([True, False]), np.array([False, True]))
    assert not multiplier_signs_ok(np.array([-1.0, 0.0]), np.array([True, False]), np.array([False, False]))
    m = build_structured_mesh(3)
    np.testing.assert_array_equal(sample_interior(np.arange(16.0), m), [5, 6, 9, 10])
