"""Mesh convergence tables with rho = h^2 for the unconstrained targets and the control recovery.

Usage: python3 scripts/convergence_study.py [--out DIR]
"""

import argparse
from pathlib import Path

from energyoc.analysis import StudyOptions, run_convergence_study
from energyoc.export import table_csv, write_text
from energyoc.targets import NO_CONSTRAINTS, TargetSpec, preset_constraints

LEVELS = (8, 16, 32, 64, 128)


def main(out: Path):
    studies = [
        ("u1_none", TargetSpec("u1"), NO_CONSTRAINTS, LEVELS, StudyOptions(), ()),
        ("u2_none", TargetSpec("u2"), NO_CONSTRAINTS, LEVELS, StudyOptions(), ()),
        ("u3_none", TargetSpec("u3"), NO_CONSTRAINTS, LEVELS, StudyOptions(), ()),
        ("u1_g1", TargetSpec("u1"), preset_constraints("g1"), LEVELS, StudyOptions(), ()),
        ("u1_control", TargetSpec("u1"), NO_CONSTRAINTS, (32, 64, 128), StudyOptions(reconstruct=True),
         ("err_control", "eoc_control")),
    ]
    for name, target, constraint, levels, options, extra in studies:
        table = run_convergence_study(target, constraint, levels, options, timing=False)
        text = table_csv(table, extra)
        write_text(out / f"{name}.csv", text)
        print(f"# {name}\n{text}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("out/study"))
    main(p.parse_args().out)
