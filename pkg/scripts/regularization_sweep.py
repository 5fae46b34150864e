"""Distance between the regularized and the desired state as rho decreases on a fixed mesh.

The target 0.45 u1 is smooth and lies strictly inside the g1 barriers, so
the error should decay like rho until the finite element error takes over.

Usage: python3 scripts/regularization_sweep.py [--n 128]
"""

import argparse

import numpy as np

from energyoc.analysis import l2_error
from energyoc.assembly import FEMSystem
from energyoc.mesh import build_structured_mesh
from energyoc.state_vi import solve_state_constrained
from energyoc.targets import TargetSpec, preset_constraints


def main(n: int):
    u1 = TargetSpec("u1")
    g = preset_constraints("g1")

    def target(x, y):
        return 0.45 * u1(x, y)

    mesh = build_structured_mesh(n)
    fem = FEMSystem(mesh)
    rhos = np.logspace(-1, -6, 11)
    errs = []
    print("rho,err_l2,iterations")
    for rho in rhos:
        sol = solve_state_constrained(mesh, rho, target, g.lower, g.upper, system=fem)
        errs.append(l2_error(sol.u, mesh, target))
        print(f"{rho:.3e},{errs[-1]:.6e},{sol.report.iterations}")
    sel = rhos >= 1e-4
    slope = np.polyfit(np.log(rhos[sel]), np.log(np.array(errs)[sel]), 1)[0]
    print(f"least squares slope for rho in [1e-4, 1e-1]: {slope:.3f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=128)
    main(p.parse_args().n)
