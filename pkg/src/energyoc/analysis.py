"""Error norms, convergence orders and the rho = h^2 refinement study."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import FEMSystem, element_geometry, quadrature_points
from .linsolve import SolverError
from .mesh import build_structured_mesh, coarse_fine_pair
from .quadrature import QuadratureRule, default_rule
from .recovery import control_error_dual, reconstruct_control
from .targets import NO_CONSTRAINTS, ConstraintSpec, TargetSpec


def _rule(quad: QuadratureRule | None, subdivisions: int) -> QuadratureRule:
    if subdivisions < 1:
        raise ValueError("subdivisions must be >= 1")
    return (quad or default_rule()).subdivide(subdivisions)


def l2_error(u, mesh, exact, quad: QuadratureRule | None = None, subdivisions: int = 1) -> float:
    """``||u_h - exact||_{L2}`` with the element-wise (optionally subdivided) rule."""
    rule = _rule(quad, subdivisions)
    xq, wq = quadrature_points(mesh, rule)
    uh = np.asarray(u)[mesh.elements] @ rule.points.T  # (n_el, n_q)
    ex = np.asarray(exact(xq[..., 0], xq[..., 1]), dtype=float)
    return float(np.sqrt(np.sum(wq * (uh - ex) ** 2)))


def h1_seminorm_error(u, mesh, exact_gradient, quad: QuadratureRule | None = None,
                      subdivisions: int = 1) -> float:
    """``||grad u_h - exact_gradient||_{L2}``; ``grad u_h`` is constant per element."""
    rule = _rule(quad, subdivisions)
    _, grads = element_geometry(mesh)
    gu = np.einsum("ei,eid->ed", np.asarray(u)[mesh.elements], grads)
    xq, wq = quadrature_points(mesh, rule)
    gx, gy = exact_gradient(xq[..., 0], xq[..., 1])
    d2 = (gu[:, None, 0] - gx) ** 2 + (gu[:, None, 1] - gy) ** 2
    return float(np.sqrt(np.sum(wq * d2)))


def eoc(errors, hs) -> list[float]:
    """Orders ``log(e_{i-1}/e_i) / log(h_{i-1}/h_i)``; NaN where an error is zero or missing."""
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("need at least two (error, h) pairs of equal length")
    out = []
    for i in range(1, len(errors)):
        e0, e1 = errors[i - 1], errors[i]
        if not (e0 > 0 and e1 > 0) or not np.isfinite(e0) or not np.isfinite(e1):
            out.append(math.nan)
            continue
        out.append(math.log(e0 / e1) / math.log(hs[i - 1] / hs[i]))
    return out


@dataclass
class StudyRow:
    level: int
    n: int
    h: float
    rho: float
    dofs: int
    err_l2: float
    err_h1: float
    eoc_l2: float = math.nan
    eoc_h1: float = math.nan
    newton_iters: int = 0
    wall_ms: float = 0.0
    err_control: float = math.nan  # discrete H^-1 error of the reconstructed control
    eoc_control: float = math.nan
    failed: bool = False
    message: str = ""


@dataclass
class ConvergenceTable:
    target: str
    constraint: str
    rows: list[StudyRow] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


@dataclass
class StudyOptions:
    """``rho`` is ``"h2"`` (coupling rho = (1/n)^2) or a positive number."""

    rho: str | float = "h2"
    c: float = 1.0
    tol: float = 1e-5
    max_iter: int = 100
    rel_tol: float = 1e-10
    reconstruct: bool = False
    coarse_factor: int = 4
    inner: str = "pcg"


def resolve_rho(rho, n: int) -> float:
    if rho == "h2":
        return 1.0 / n**2
    value = float(rho)
    if value <= 0:
        raise ValueError("rho must be positive")
    return value


def solve_level(mesh, rho, target, constraint: ConstraintSpec, options: StudyOptions,
                system: FEMSystem | None = None):
    """Dispatch on the constraint mode; returns ``(u, report_or_None, solution_or_None)``."""
    from .control_vi import solve_control_constrained
    from .state_vi import solve_state_constrained
    from .unconstrained import solve_unconstrained

    fem = system if system is not None else FEMSystem(mesh)
    if constraint.mode == "none":
        return solve_unconstrained(mesh, rho, target, options.rel_tol, system=fem), None, None
    solver = solve_state_constrained if constraint.mode == "state" else solve_control_constrained
    sol = solver(mesh, rho, target, constraint.lower, constraint.upper, c=options.c,
                 tol=options.tol, max_iter=options.max_iter, rel_tol=options.rel_tol, system=fem)
    return sol.u, sol.report, sol


def run_convergence_study(target: TargetSpec, constraint: ConstraintSpec = NO_CONSTRAINTS,
                          levels=(8, 16, 32, 64, 128), options: StudyOptions | None = None,
                          timing: bool = True) -> ConvergenceTable:
    """Solve on each level with rho = h^2 (by default) and tabulate errors against the target."""
    options = options or StudyOptions()
    levels = list(levels)
    if levels != sorted(levels):
        raise ValueError("levels must be ascending")
    table = ConvergenceTable(target.kind, constraint.name)
    sub = target.quadrature_subdivisions
    for lvl, n in enumerate(levels):
        t0 = time.perf_counter()
        if options.reconstruct:
            if n % options.coarse_factor:
                raise ValueError(f"level n={n} is not divisible by {options.coarse_factor}")
            coarse, mesh = coarse_fine_pair(n // options.coarse_factor, options.coarse_factor)
        else:
            mesh = build_structured_mesh(n)
        rho = resolve_rho(options.rho, n)
        row = StudyRow(lvl, n, mesh.spacing, rho, len(mesh.interior), math.nan, math.nan)
        try:
            fem = FEMSystem(mesh)
            u, report, _ = solve_level(mesh, rho, target, constraint, options, fem)
            if report is not None:
                row.newton_iters = report.iterations
                if not report.converged:
                    row.failed = True
                    row.message = report.message
            row.err_l2 = l2_error(u, mesh, target, subdivisions=sub)
            grad = target.gradient
            if target.kind != "u3":
                row.err_h1 = h1_seminorm_error(u, mesh, grad, subdivisions=sub)
            if options.reconstruct and target.has_exact_control:
                z, _ = reconstruct_control(u, mesh, coarse, inner=options.inner)
                row.err_control = control_error_dual(z, target.control, mesh, coarse, system=fem)
        except (SolverError, np.linalg.LinAlgError) as exc:
            row.failed = True
            row.message = str(exc)
        row.wall_ms = (time.perf_counter() - t0) * 1e3 if timing else math.nan
        table.rows.append(row)
    if len(table.rows) >= 2:
        hs = table.column("h")
        for name in ("l2", "h1", "control"):
            src = "err_" + name
            rates = eoc(list(table.column(src)), list(hs))
            for row, r in zip(table.rows[1:], rates):
                setattr(row, "eoc_" + name, r)
    return table
