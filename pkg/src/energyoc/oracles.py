"""Brute-force reference solutions for tiny box-constrained quadratic programs.

Both oracles minimize ``1/2 u' B u - load' u`` by enumerating every
assignment of the constraints to {lower, free, upper}: each assignment fixes
a face of the feasible box, the face minimizer is an equality-constrained
solve, and the answer is the feasible face minimizer with the smallest
objective. No multiplier or sign logic is involved, so they share nothing
with the active-set solvers they check. The cost is ``3^n`` small solves;
``n = 9`` (the interior of the 4x4 grid) takes well under a second.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

MAX_ENUMERATION = 12


def _objective(B, load, U):
    # U has one candidate per column
    return 0.5 * np.einsum("ik,ij,jk->k", U, B, U) - load @ U


def _best(B, load, cands, feasible):
    if not np.any(feasible):
        return None
    U = cands[:, feasible]
    J = _objective(B, load, U)
    return U[:, int(np.argmin(J))]


def _check_size(n):
    if n > MAX_ENUMERATION:
        raise ValueError(f"enumeration over 3^{n} assignments is too large (limit 3^{MAX_ENUMERATION})")


def enumerate_box_qp(B, load, lower, upper, feas_tol: float = 1e-10) -> np.ndarray:
    """Minimizer of the quadratic over ``lower <= u <= upper`` (pointwise bounds on u)."""
    B = np.asarray(B.toarray() if hasattr(B, "toarray") else B, dtype=float)
    load, lower, upper = (np.asarray(a, dtype=float) for a in (load, lower, upper))
    n = len(load)
    _check_size(n)
    best, best_J = None, np.inf
    for free_mask in itertools.product((False, True), repeat=n):
        free = np.flatnonzero(free_mask)
        fixed = np.flatnonzero(~np.array(free_mask, dtype=bool))
        # all 2^|fixed| lower/upper choices for this free set at once
        choices = np.array(list(itertools.product((0, 1), repeat=len(fixed))), dtype=bool).T
        m = choices.shape[1] if len(fixed) else 1
        U = np.zeros((n, m))
        if len(fixed):
            U[fixed] = np.where(choices, upper[fixed, None], lower[fixed, None])
        if len(free):
            rhs = load[free, None] - B[np.ix_(free, fixed)] @ U[fixed]
            U[free] = np.linalg.solve(B[np.ix_(free, free)], rhs)
        ok = np.all((U >= lower[:, None] - feas_tol) & (U <= upper[:, None] + feas_tol), axis=0)
        u = _best(B, load, U, ok)
        if u is not None:
            J = float(_objective(B, load, u[:, None])[0])
            if J < best_J:
                best, best_J = u, J
    if best is None:
        raise ValueError("the constraint set is empty")
    return best


def enumerate_flux_qp(B, K, load, lower, upper, feas_tol: float = 1e-10) -> np.ndarray:
    """Minimizer of the quadratic over ``lower <= K u <= upper`` with an invertible ``K``."""
    B = np.asarray(B.toarray() if hasattr(B, "toarray") else B, dtype=float)
    K = np.asarray(K.toarray() if hasattr(K, "toarray") else K, dtype=float)
    load, lower, upper = (np.asarray(a, dtype=float) for a in (load, lower, upper))
    n = len(load)
    _check_size(n)
    best, best_J = None, np.inf
    for act_mask in itertools.product((False, True), repeat=n):
        act = np.flatnonzero(act_mask)
        k = len(act)
        choices = np.array(list(itertools.product((0, 1), repeat=k)), dtype=bool).T
        m = choices.shape[1] if k else 1
        F = np.where(choices, upper[act, None], lower[act, None]) if k else np.zeros((0, 1))
        KA = K[act]
        # face minimizer: stationarity B u + KA' mu = load with KA u = F
        kkt = np.block([[B, KA.T], [KA, np.zeros((k, k))]])
        rhs = np.vstack([np.repeat(load[:, None], m, axis=1), F])
        U = np.linalg.solve(kkt, rhs)[:n]
        Q = K @ U
        ok = np.all((Q >= lower[:, None] - feas_tol) & (Q <= upper[:, None] + feas_tol), axis=0)
        u = _best(B, load, U, ok)
        if u is not None:
            J = float(_objective(B, load, u[:, None])[0])
            if J < best_J:
                best, best_J = u, J
    if best is None:
        raise ValueError("the constraint set is empty")
    return best


@dataclass
class RandomInstance:
    """Smooth target and bound fields for oracle comparisons."""

    target: object
    lower: object
    upper: object


def _smooth_field(rng, n_modes=3, scale=1.0):
    a = rng.normal(size=(n_modes, n_modes)) * scale
    shift = rng.uniform(0.0, 1.0, size=2)

    def f(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for p in range(n_modes):
            for q in range(n_modes):
                out += a[p, q] * np.cos(np.pi * (p * (x + shift[0]))) * np.cos(np.pi * (q * (y + shift[1])))
        return out

    return f


def random_state_instance(rng: np.random.Generator) -> RandomInstance:
    """Target of order one with barriers ``g_- <= 0 <= g_+`` that typically bind."""
    t = _smooth_field(rng, scale=0.6)
    lo = _smooth_field(rng, scale=0.1)
    hi = _smooth_field(rng, scale=0.1)
    a = rng.uniform(0.05, 0.4)
    b = rng.uniform(0.05, 0.4)

    def lower(x, y):
        return -a - np.abs(lo(x, y))

    def upper(x, y):
        return b + np.abs(hi(x, y))

    return RandomInstance(t, lower, upper)


def random_control_instance(rng: np.random.Generator) -> RandomInstance:
    """Target with flux bounds ``f_- < f_+`` of the size of its Laplacian."""
    t = _smooth_field(rng, scale=0.6)
    lo = _smooth_field(rng, scale=1.0)
    hi = _smooth_field(rng, scale=1.0)
    a = rng.uniform(0.5, 5.0)
    b = rng.uniform(0.5, 5.0)

    def lower(x, y):
        return -a - np.abs(lo(x, y))

    def upper(x, y):
        return b + np.abs(hi(x, y))

    return RandomInstance(t, lower, upper)
