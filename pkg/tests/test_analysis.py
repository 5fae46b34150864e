import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from energyoc.analysis import (
    StudyOptions,
    eoc,
    h1_seminorm_error,
    l2_error,
    resolve_rho,
    run_convergence_study,
)
from energyoc.mesh import build_structured_mesh
from energyoc.targets import NO_CONSTRAINTS, TargetSpec, constant
from energyoc.targets import ConstraintSpec


def test_eoc_examples():
    assert eoc([0.1, 0.025], [0.2, 0.1]) == pytest.approx([2.0])
    assert eoc([0.1, 0.05], [0.2, 0.1]) == pytest.approx([1.0])
    assert eoc([0.3, 0.3, 0.3], [0.4, 0.2, 0.1]) == pytest.approx([0.0, 0.0])
    assert math.isnan(eoc([0.1, 0.0], [0.2, 0.1])[0])
    with pytest.raises(ValueError):
        eoc([0.1], [0.2])


@given(st.floats(1e-8, 1.0), st.floats(0.1, 4.0))
def test_eoc_recovers_power_law(e0, p):
    hs = [0.5, 0.25, 0.125]
    errs = [e0 * h**p for h in hs]
    assert np.allclose(eoc(errs, hs), p, atol=1e-9)


def test_piecewise_linear_is_exact():
    m = build_structured_mesh(8)

    def f(x, y):
        return 1 + 2 * x - 3 * y

    u = f(m.nodes[:, 0], m.nodes[:, 1])
    assert l2_error(u, m, f) < 1e-13
    assert h1_seminorm_error(u, m, lambda x, y: (2 + 0 * x, -3 + 0 * y)) < 1e-13


def test_norms_of_u1():
    t = TargetSpec("u1")
    m = build_structured_mesh(32)
    zero = np.zeros(m.n_nodes)
    assert abs(l2_error(zero, m, t) - 0.5) < 1e-6
    assert abs(h1_seminorm_error(zero, m, t.gradient) - np.pi / np.sqrt(2)) < 1e-4


def test_interpolation_ratio():
    t = TargetSpec("u1")
    errs = []
    for n in (16, 32):
        m = build_structured_mesh(n)
        errs.append(l2_error(t(m.nodes[:, 0], m.nodes[:, 1]), m, t))
    assert 3.6 < errs[0] / errs[1] < 4.4


def test_error_invariant_under_reflection(rng):
    m = build_structured_mesh(8)
    t = TargetSpec("u1")
    u = rng.normal(size=m.n_nodes)
    u[m.boundary_mask] = 0
    flipped = u.reshape(9, 9).T.ravel()
    assert l2_error(u, m, t) == pytest.approx(l2_error(flipped, m, t), rel=1e-12)
    assert h1_seminorm_error(u, m, t.gradient) == pytest.approx(h1_seminorm_error(flipped, m, t.gradient), rel=1e-12)


def test_resolve_rho():
    assert resolve_rho("h2", 8) == 1 / 64
    assert resolve_rho(0.5, 8) == 0.5
    with pytest.raises(ValueError):
        resolve_rho(-1.0, 8)


def test_study_table():
    t = TargetSpec("u1")
    table = run_convergence_study(t, NO_CONSTRAINTS, (8, 16, 32, 64), timing=False)
    assert [r.n for r in table.rows] == [8, 16, 32, 64]
    for r in table.rows:
        assert r.rho == pytest.approx(r.h**2)
        assert r.err_l2 <= 0.5 + 1e-6
        assert not r.failed
        assert math.isnan(r.wall_ms)
    assert math.isnan(table.rows[0].eoc_l2)
    errs = table.column("err_l2")
    assert np.all(np.diff(errs) < 0)
    assert 1.8 < table.rows[-1].eoc_l2 < 2.2


def test_inactive_state_constraints_match_unconstrained():
    t = TargetSpec("u1")
    huge = ConstraintSpec("state", constant(-1e9), constant(1e9), "huge")
    a = run_convergence_study(t, NO_CONSTRAINTS, (8, 16, 32), timing=False)
    b = run_convergence_study(t, huge, (8, 16, 32), timing=False)
    for ra, rb in zip(a.rows, b.rows):
        assert abs(ra.err_l2 - rb.err_l2) <= 1e-10
        assert abs(ra.err_h1 - rb.err_h1) <= 1e-10


def test_study_with_reconstruction():
    t = TargetSpec("u1")
    table = run_convergence_study(t, NO_CONSTRAINTS, (8, 16), StudyOptions(reconstruct=True), timing=False)
    assert all(np.isfinite(table.column("err_control")))
    assert np.isfinite(table.rows[1].eoc_control)


def test_failed_rows_are_marked():
    t = TargetSpec("u2")
    tight = ConstraintSpec("state", constant(-0.01), constant(0.01), "tight")
    table = run_convergence_study(t, tight, (8, 16), StudyOptions(max_iter=1), timing=False)
    assert all(r.failed and r.message for r in table.rows)
    with pytest.raises(ValueError):
        run_convergence_study(t, NO_CONSTRAINTS, (16, 8))
