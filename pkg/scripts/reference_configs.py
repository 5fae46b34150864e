"""Run the eleven reference configurations at n = 128 and export fields.

Usage: python3 scripts/reference_configs.py [--out DIR]
"""

import argparse
import sys
import time

from energyoc.cli import main

RUNS = [
    ("u1", "g1", 32), ("u1", "g2", 32), ("u2", "g1", 32), ("u2", "g2", 32),
    ("u1", "f1", 32), ("u1", "f2", 32), ("u2", "f3", 32), ("u2", "f4", 32),
    ("u3", "g1", 32), ("u3", "f4", 32), ("u3", "f5", 16),
]


def run(out: str) -> int:
    worst = 0
    for target, preset, nc in RUNS:
        t0 = time.perf_counter()
        code = main(["reconstruct", "--target", target, "--constraints", preset, "--n", "128",
                     "--n-coarse", str(nc), "--out", out])
        print(f"  exit {code}, {time.perf_counter() - t0:.1f} s")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="out/reference")
    sys.exit(run(p.parse_args().out))
