"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
pytest terminal summary.
"""

import json
import time

import numpy as np
import pytest

from energyoc.analysis import StudyOptions, eoc, l2_error, run_convergence_study
from energyoc.assembly import FEMSystem
from energyoc.cli import EXIT_OK, main
from energyoc.control_vi import bound_moments, solve_control_constrained
from energyoc.export import read_vtk_scalars
from energyoc.mesh import build_structured_mesh, prolong_nodal
from energyoc.oracles import enumerate_box_qp, enumerate_flux_qp, random_control_instance, random_state_instance
from energyoc.state_vi import complementarity_residual, sample_interior, solve_state_constrained
from energyoc.targets import NO_CONSTRAINTS, TargetSpec, preset_constraints
from energyoc.verify import newton_update_gap

LEVELS = (8, 16, 32, 64, 128)
SEED = 20240611


def test_criterion_01_smooth_rate(criterion):
    t0 = time.perf_counter()
    table = run_convergence_study(TargetSpec("u1"), NO_CONSTRAINTS, LEVELS, timing=False)
    wall = time.perf_counter() - t0
    rates = table.column("eoc_l2")[-2:]
    ok = bool(np.all((rates >= 1.85) & (rates <= 2.15))) and wall <= 60
    assert criterion("criterion 1", ok, f"L2 EOC last pairs {rates.round(4).tolist()} in [1.85, 2.15], {wall:.1f} s")


def test_criterion_02_rough_rate(criterion):
    table = run_convergence_study(TargetSpec("u3"), NO_CONSTRAINTS, LEVELS, timing=False)
    rates = table.column("eoc_l2")[-2:]
    ok = bool(np.all((rates >= 0.35) & (rates <= 0.65)))
    assert criterion("criterion 2", ok, f"L2 EOC last pairs {rates.round(4).tolist()} in [0.35, 0.65]")


def test_criterion_03_regularization_sweep(criterion):
    # feasible smooth target 0.9 g+ strictly inside the g1 barriers
    u1 = TargetSpec("u1")
    g = preset_constraints("g1")

    def target(x, y):
        return 0.45 * u1(x, y)

    mesh = build_structured_mesh(128)
    fem = FEMSystem(mesh)
    rhos = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    errs = []
    for rho in rhos:
        sol = solve_state_constrained(mesh, rho, target, g.lower, g.upper, system=fem)
        assert sol.report.converged
        errs.append(l2_error(sol.u, mesh, target))
    slope = np.polyfit(np.log(rhos), np.log(errs), 1)[0]
    ok = 0.8 <= slope <= 1.2
    assert criterion("criterion 3", ok, f"log-log slope {slope:.4f} in [0.8, 1.2], errors {np.round(errs, 8).tolist()}")


def test_criterion_04_state_oracle(criterion):
    rng = np.random.default_rng(SEED)
    mesh = build_structured_mesh(4)
    fem = FEMSystem(mesh)
    rho = mesh.spacing**2
    B = fem.system_matrix(rho)
    t0 = time.perf_counter()
    gap, binding = 0.0, 0
    for _ in range(20):
        inst = random_state_instance(rng)
        sol = solve_state_constrained(mesh, rho, inst.target, inst.lower, inst.upper, system=fem, subdivisions=1)
        ref = enumerate_box_qp(B, fem.load(inst.target, 1), sample_interior(inst.lower, mesh),
                               sample_interior(inst.upper, mesh))
        gap = max(gap, float(np.max(np.abs(sol.u_int - ref))))
        binding += len(sol.active_minus) + len(sol.active_plus)
    wall = time.perf_counter() - t0
    ok = gap <= 1e-8 and wall <= 30 and binding > 0
    assert criterion("criterion 4", ok, f"max gap {gap:.2e} <= 1e-8 over 20 instances "
                                        f"({binding} active constraints), {wall:.1f} s")


def test_criterion_05_control_oracle(criterion):
    rng = np.random.default_rng(SEED)
    mesh = build_structured_mesh(4)
    fem = FEMSystem(mesh)
    rho = mesh.spacing**2
    B = fem.system_matrix(rho)
    gap, binding = 0.0, 0
    for _ in range(20):
        inst = random_control_instance(rng)
        sol = solve_control_constrained(mesh, rho, inst.target, inst.lower, inst.upper, system=fem, subdivisions=1)
        ref = enumerate_flux_qp(B, fem.K, fem.load(inst.target, 1), bound_moments(inst.lower, mesh),
                                bound_moments(inst.upper, mesh))
        gap = max(gap, float(np.max(np.abs(sol.u_int - ref))))
        binding += len(sol.active_minus) + len(sol.active_plus)
    ok = gap <= 1e-8 and binding > 0
    assert criterion("criterion 5", ok, f"max gap {gap:.2e} <= 1e-8 over 20 instances ({binding} active constraints)")


def test_criterion_06_newton_equals_active_set(criterion):
    rng = np.random.default_rng(SEED)
    gaps = [newton_update_gap(rng) for _ in range(5)]
    ok = max(gaps) <= 1e-10
    assert criterion("criterion 6", ok, f"max update gap {max(gaps):.2e} <= 1e-10 over 5 instances")


def test_criterion_07_complementarity(criterion):
    mesh = build_structured_mesh(128)
    fem = FEMSystem(mesh)
    rho = mesh.spacing**2
    details, ok = [], True
    for target in ("u1", "u2"):
        for preset in ("g1", "g2"):
            g = preset_constraints(preset)
            sol = solve_state_constrained(mesh, rho, TargetSpec(target), g.lower, g.upper, system=fem)
            r = sol.report
            comp = complementarity_residual(sol)
            bound = 1e-8 * (1 + np.max(np.abs(sol.lam)))
            good = r.converged and r.feasibility < 1e-5 and comp < bound and r.iterations <= 50
            ok &= bool(good)
            details.append(f"{target}/{preset}: it={r.iterations} feas={r.feasibility:.1e} comp={comp:.1e}")
    assert criterion("criterion 7", ok, "; ".join(details))


def test_criterion_08_control_recovery_rate(criterion):
    table = run_convergence_study(TargetSpec("u1"), NO_CONSTRAINTS, (32, 64, 128),
                                  StudyOptions(reconstruct=True), timing=False)
    errs = table.column("err_control")
    rates = table.column("eoc_control")[1:]
    ok = bool(np.all((rates >= 0.7) & (rates <= 1.3)))
    # the observed order is about 2 on smooth data, above the guaranteed lower bound of 1
    assert criterion("criterion 8", ok, f"H^-1 control EOC {rates.round(4).tolist()} in [0.7, 1.3], "
                                        f"errors {errs.round(8).tolist()}")


def test_criterion_09_constrained_mesh_convergence(criterion):
    u1 = TargetSpec("u1")
    g = preset_constraints("g1")
    ref_mesh = build_structured_mesh(256)
    ref_fem = FEMSystem(ref_mesh)
    ref = solve_state_constrained(ref_mesh, ref_mesh.spacing**2, u1, g.lower, g.upper, system=ref_fem)
    assert ref.report.converged
    M = ref_fem.M_full
    levels = (16, 32, 64)  # the reference stays at least four times finer
    errs = []
    for n in levels:
        mesh = build_structured_mesh(n)
        sol = solve_state_constrained(mesh, mesh.spacing**2, u1, g.lower, g.upper)
        assert sol.report.converged
        d = prolong_nodal(sol.u, mesh, ref_mesh) - ref.u
        errs.append(float(np.sqrt(d @ (M @ d))))
    rates = np.array(eoc(errs, [1.0 / n for n in levels]))
    ok = bool(np.all((rates >= 0.8) & (rates <= 2.2))) and bool(np.all(np.diff(errs) < 0))
    assert criterion("criterion 9", ok, f"L2 EOC vs n=256 reference {rates.round(4).tolist()} in [0.8, 2.2], "
                                        f"errors {np.round(errs, 10).tolist()}")


REFERENCE_RUNS = [
    ("u1", "g1", 32), ("u1", "g2", 32), ("u2", "g1", 32), ("u2", "g2", 32),
    ("u1", "f1", 32), ("u1", "f2", 32), ("u2", "f3", 32), ("u2", "f4", 32),
    ("u3", "g1", 32), ("u3", "f4", 32), ("u3", "f5", 16),
]


def test_criterion_10_reference_configurations(criterion, tmp_path):
    t0 = time.perf_counter()
    n = 128
    h = 1.0 / n
    problems = []
    for target, preset, nc in REFERENCE_RUNS:
        code = main(["reconstruct", "--target", target, "--constraints", preset, "--n", str(n),
                     "--n-coarse", str(nc), "--out", str(tmp_path)])
        stem = tmp_path / f"reconstruct_{target}_{preset}_n{n}_H{nc}"
        if code != EXIT_OK:
            problems.append(f"{target}/{preset} exit {code}")
            continue
        manifest = json.loads(stem.with_name(stem.name + "_manifest.json").read_text())
        state = read_vtk_scalars(stem.with_name(stem.name + "_state.vtk"))
        control = read_vtk_scalars(stem.with_name(stem.name + "_control.vtk"))["control"]
        report = manifest["report"]
        u = state["state"]
        # a piecewise constant control is bounded by the discrete Laplacian of the state
        bounded = np.all(np.isfinite(control)) and np.max(np.abs(control)) <= 8 * np.max(np.abs(u)) / h**2
        good = (report["converged"] and report["feasibility"] < report["tol"] and len(u) == (n + 1) ** 2
                and len(control) == 2 * nc * nc and bounded and manifest["elements"] == 32768
                and manifest["dofs"] == 16129)
        if not good:
            problems.append(f"{target}/{preset}")
    wall = time.perf_counter() - t0
    ok = not problems and wall <= 15 * 60
    assert criterion("criterion 10", ok, f"{len(REFERENCE_RUNS) - len(problems)}/{len(REFERENCE_RUNS)} configurations "
                                         f"converged, feasible, bounded, valid VTK; {wall:.0f} s"
                                         + (f"; problems: {problems}" if problems else ""))
