"""Command line driver: single solves, convergence studies, control recovery and oracle checks.

Exit codes: 0 success, 1 invalid arguments, 2 solver nonconvergence (or an
oracle mismatch in ``verify``).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import StudyOptions, h1_seminorm_error, l2_error, resolve_rho, run_convergence_study, solve_level
from .assembly import FEMSystem
from .export import fmt, manifest_json, package_version, table_csv, vtk_unstructured, write_text
from .linsolve import SolverError
from .mesh import build_structured_mesh
from .recovery import control_error_dual, reconstruct_control
from .targets import NO_CONSTRAINTS, PRESETS, TARGET_KINDS, TargetSpec, preset_constraints

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _rho(text):
    return "h2" if text == "h2" else _positive_float(text)


def _levels(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma separated integers, got {text!r}") from None
    if len(vals) < 1 or any(v < 1 for v in vals) or vals != sorted(vals):
        raise argparse.ArgumentTypeError("levels must be ascending positive integers")
    return vals


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--target", choices=TARGET_KINDS, default="u1")
    common.add_argument("--k", type=_positive_float, default=40.0, help="steepness of u2 (default 40)")
    common.add_argument("--constraints", choices=("none",) + PRESETS, default="none")
    common.add_argument("--n", type=_positive_int, help="subdivisions per side of the state mesh")
    common.add_argument("--levels", type=_levels, help="comma separated ascending n values")
    common.add_argument("--n-coarse", type=_positive_int, help="control mesh subdivisions (default n/4)")
    common.add_argument("--rho", type=_rho, default="h2", help="'h2' (rho = (1/n)^2) or a positive number")
    common.add_argument("--c", type=_positive_float, default=1.0, help="active-set parameter")
    common.add_argument("--tol", type=_positive_float, default=1e-5, help="feasibility tolerance")
    common.add_argument("--max-iter", type=_positive_int, default=100)
    common.add_argument("--out", type=Path, default=Path("out"))
    common.add_argument("--format", choices=("csv", "vtk", "both"), default="both")
    common.add_argument("--seed", type=int, default=0, help="seed of the verify instances")
    common.add_argument("--timing", action="store_true",
                        help="record wall times (makes CSV output non-reproducible)")

    p = _Parser(prog="energyoc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="single mesh solve and field export")
    sub.add_parser("study", parents=[common], help="convergence table over --levels")
    sub.add_parser("reconstruct", parents=[common], help="state solve plus control recovery")
    sub.add_parser("verify", parents=[common], help="oracle checks on tiny meshes")
    return p


def _target(args) -> TargetSpec:
    return TargetSpec(args.target, args.k)


def _constraint(args):
    return NO_CONSTRAINTS if args.constraints == "none" else preset_constraints(args.constraints, args.k)


def _options(args, reconstruct=False) -> StudyOptions:
    return StudyOptions(rho=args.rho, c=args.c, tol=args.tol, max_iter=args.max_iter, reconstruct=reconstruct)


def _run_id(args, n=None, n_coarse=None) -> str:
    parts = [args.command, args.target, args.constraints]
    if args.target != "u1" and args.k != 40.0:
        parts.append(f"k{args.k:g}")
    if n is not None:
        parts.append(f"n{n}")
    if n_coarse is not None:
        parts.append(f"H{n_coarse}")
    if args.rho != "h2":
        parts.append(f"rho{args.rho:g}")
    return "_".join(parts)


def _params(args) -> dict:
    d = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    d.pop("out", None)
    return d


def _write_manifest(args, run_id, payload: dict):
    data = {"run_id": run_id, "version": package_version(), "parameters": _params(args)}
    data.update(payload)
    write_text(args.out / f"{run_id}_manifest.json", manifest_json(data))


def _state_and_multiplier(args, n):
    mesh = build_structured_mesh(n)
    fem = FEMSystem(mesh)
    rho = resolve_rho(args.rho, n)
    u, report, sol = solve_level(mesh, rho, _target(args), _constraint(args), _options(args), fem)
    fields = {"state": u}
    if sol is not None:
        name = "lambda" if hasattr(sol, "lam") else "w"
        mult = np.zeros(mesh.n_nodes)
        mult[mesh.interior] = sol.lam if name == "lambda" else sol.w
        fields[name] = mult
    return mesh, fem, rho, u, report, fields


def _coarse_n(args, n):
    nc = args.n_coarse if args.n_coarse is not None else n // 4
    if nc < 1 or n % nc:
        raise UsageError(f"--n-coarse {nc} must divide --n {n}")
    return nc


def cmd_solve(args, reconstruct=False) -> int:
    if args.n is None:
        raise UsageError("--n is required")
    n = args.n
    nc = _coarse_n(args, n) if (reconstruct or args.n_coarse is not None) else None
    mesh, fem, rho, u, report, fields = _state_and_multiplier(args, n)
    target = _target(args)
    run_id = _run_id(args, n, nc)
    payload = {
        "rho": rho,
        "elements": mesh.n_elements,
        "dofs": fem.dofs,
        "err_l2": l2_error(u, mesh, target, subdivisions=target.quadrature_subdivisions),
        "report": report.as_dict() if report is not None else None,
    }
    if target.kind != "u3":
        payload["err_h1"] = h1_seminorm_error(u, mesh, target.gradient,
                                              subdivisions=target.quadrature_subdivisions)
    z = None
    if nc is not None:
        coarse = build_structured_mesh(nc)
        z, _ = reconstruct_control(u, mesh, coarse)
        payload["n_coarse"] = nc
        payload["coarse_elements"] = coarse.n_elements
        payload["control_min"] = float(z.min())
        payload["control_max"] = float(z.max())
        if target.has_exact_control and args.constraints == "none":
            payload["err_control_dual"] = control_error_dual(z, target.control, mesh, coarse, system=fem)
    if args.format in ("vtk", "both"):
        write_text(args.out / f"{run_id}_state.vtk", vtk_unstructured(mesh, point_data=fields, title=run_id))
        if z is not None:
            write_text(args.out / f"{run_id}_control.vtk",
                       vtk_unstructured(coarse, cell_data={"control": z}, title=run_id))
    if args.format in ("csv", "both"):
        row = [("n", n), ("rho", rho), ("dofs", fem.dofs), ("err_l2", payload["err_l2"]),
               ("newton_iters", report.iterations if report else 0),
               ("converged", int(report.converged) if report else 1)]
        text = ",".join(k for k, _ in row) + "\n" + ",".join(fmt(v) for _, v in row) + "\n"
        write_text(args.out / f"{run_id}.csv", text)
    _write_manifest(args, run_id, payload)
    ok = report is None or report.converged
    print(f"{run_id}: err_l2={payload['err_l2']:.6e}"
          + (f" iterations={report.iterations} converged={report.converged}" if report else ""))
    if not ok:
        print(f"nonconvergence: {report.message}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_study(args) -> int:
    levels = args.levels or ([args.n] if args.n else None)
    if not levels:
        raise UsageError("--levels (or --n) is required")
    reconstruct = args.n_coarse is not None
    table = run_convergence_study(_target(args), _constraint(args), levels,
                                  _options(args, reconstruct), timing=args.timing)
    run_id = _run_id(args)
    extra = ("err_control", "eoc_control") if reconstruct else ()
    text = table_csv(table, extra)
    if args.format in ("csv", "both"):
        write_text(args.out / f"{run_id}.csv", text)
    _write_manifest(args, run_id, {"levels": levels,
                                   "failed_levels": [r.n for r in table.rows if r.failed],
                                   "messages": [r.message for r in table.rows if r.message]})
    sys.stdout.write(text)
    return EXIT_NONCONVERGED if any(r.failed for r in table.rows) else EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks

    results = run_checks(args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NONCONVERGED


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "reconstruct":
            return cmd_solve(args, reconstruct=True)
        if args.command == "study":
            return cmd_study(args)
        return cmd_verify(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
