from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class SolveReport:
    """Outcome of an active-set solve.

    ``active_sizes`` holds ``(|lower active|, |upper active|)`` for the sets
    used in each update.
    """

    converged: bool
    iterations: int
    active_sizes: list[tuple[int, int]] = field(default_factory=list)
    feasibility: float = np.nan
    complementarity: float = np.nan
    residual: float = np.nan
    tol: float = 1e-5
    c: float = 1.0
    rel_tol: float = 1e-10
    linear_iterations: int = 0
    safeguard_steps: int = 0  # penalty Newton steps, control constraints only
    message: str = ""

    def as_dict(self) -> dict:
        d = asdict(self)
        d["active_sizes"] = [list(map(int, s)) for s in self.active_sizes]
        return d


class NonConvergence(RuntimeError):
    """Raised by callers that insist on a converged active-set solve."""

    def __init__(self, report: SolveReport):
        super().__init__(report.message or "active-set iteration did not converge")
        self.report = report
