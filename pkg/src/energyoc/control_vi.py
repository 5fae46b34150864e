"""Weak control constraints f_- <= -Laplace(u) <= f_+ via the active-set method on (u, w).

Discretely the bounds act on the flux ``K u`` against load moments
``f_i = (f, phi_i)``. The multiplier ``w = K^{-1}(B u - load)`` satisfies

    F1 = B u - K w - load = 0,
    F2 = w - min(0, w + c (f_+ - K u)) - max(0, w + c (f_- - K u)) = 0.

On the active flux rows ``(K u)_i = f_i`` is enforced, elsewhere ``w_i = 0``.
Each update is the equality-constrained quadratic program

    [ B      K_A' ] [ u  ]   [ load ]
    [ K_A    0    ] [ -w ] = [ f_A  ]

solved directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import Field, FEMSystem, assemble_load, prolong_interior, restrict_interior
from .linsolve import DEFAULT_REL_TOL, DENSE_LIMIT, SolverError, SPDSolver
from .mesh import Mesh
from .report import SolveReport
from .state_vi import complementarity_map, feasibility_violation, multiplier_signs_ok, partition


@dataclass
class ControlVISolution:
    u: np.ndarray  # all nodes
    w: np.ndarray  # interior multiplier
    flux: np.ndarray  # interior K u
    report: SolveReport
    active_minus: np.ndarray
    active_plus: np.ndarray
    lower: np.ndarray  # bound moments on interior nodes
    upper: np.ndarray
    u_int: np.ndarray


def bound_moments(f, mesh: Mesh, subdivisions: int = 4) -> np.ndarray:
    """Interior moments ``(f, phi_i)`` of a bound function (arrays pass through)."""
    if callable(f):
        return restrict_interior(assemble_load(mesh, f, subdivisions=subdivisions), mesh)
    return np.asarray(f, dtype=float)


def kkt_update(B, K, load, lower, upper, act_minus, act_plus, method="auto"):
    """Solve for ``(u, w)`` with the flux pinned on the active rows and ``w = 0`` elsewhere."""
    n = len(load)
    act = np.flatnonzero(act_minus | act_plus)
    f_act = np.where(act_minus, lower, upper)[act]
    K = sp.csr_matrix(K)
    K_A = K[act]
    kkt = sp.bmat([[sp.csr_matrix(B), K_A.T], [K_A, None]], format="csc")
    rhs = np.concatenate([load, f_act])
    if method == "dense" or (method == "auto" and n <= DENSE_LIMIT):
        sol = np.linalg.solve(kkt.toarray(), rhs)
    else:
        try:
            sol = spla.splu(kkt).solve(rhs)
        except RuntimeError as exc:  # singular factor
            raise SolverError(f"reduced KKT system is singular: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise SolverError("reduced KKT system produced non-finite values")
    u = sol[:n]
    w = np.zeros(n)
    w[act] = -sol[n:]
    return u, w


def _same_sets(a, b, pinned):
    # on pinned rows only membership matters, both sides enforce the same value
    if not np.array_equal(a[0] | a[1], b[0] | b[1]):
        return False
    free = ~pinned
    return np.array_equal(a[0][free], b[0][free])


def _set_key(act_minus, act_plus, pinned) -> bytes:
    return np.packbits(act_minus | act_plus).tobytes() + np.packbits(act_minus & ~pinned).tobytes()


def _active_set_loop(B, K, load, lower, upper, c, tol, u, w, max_iter, method, report):
    """Plain active-set updates from ``(u, w)``.

    Returns ``(u, w, sets, status)`` with status ``"converged"``, ``"cycle"``
    (a partition repeats, so the iteration would loop forever) or ``"cap"``.
    """
    pinned = lower == upper
    seen = set()
    prev = None
    for m in range(max_iter + 1):
        flux = K @ u
        act_minus, act_plus = partition(flux, w, lower, upper, c)
        done = prev is not None and (
            _same_sets(prev, (act_minus, act_plus), pinned) or multiplier_signs_ok(w, *prev)
        )
        if done and feasibility_violation(flux, lower, upper) < tol:
            return u, w, prev, "converged"
        key = _set_key(act_minus, act_plus, pinned)
        if key in seen:
            return u, w, prev, "cycle"
        seen.add(key)
        if m == max_iter:
            return u, w, prev, "cap"
        u, w = kkt_update(B, K, load, lower, upper, act_minus, act_plus, method)
        report.iterations += 1
        report.active_sizes.append((int(act_minus.sum()), int(act_plus.sum())))
        prev = (act_minus, act_plus)
    raise AssertionError("unreachable")


def interior_point(B, K, load, lower, upper, u, max_steps=100, rtol=1e-10, callback=None):
    """Mehrotra predictor-corrector interior point method for ``f_- <= K u <= f_+``.

    Rows with ``f_- == f_+`` are treated as equality constraints. Each step
    factors ``[[B + K_I' D K_I, K_E'], [K_E, 0]]`` once for the predictor and
    the corrector. The iteration count is insensitive to the active-set
    structure, which is what makes it a safeguard for the active-set method.
    ``callback(u, w)`` is offered the iterate whenever the duality measure
    has dropped tenfold since the last offer; returning True stops early.
    Returns ``(u, w, steps)`` with ``w`` in the sign convention of ``F1``.
    """
    K = sp.csr_matrix(K)
    B = sp.csr_matrix(B)
    n = len(load)
    eq = np.flatnonzero(lower == upper)
    ineq = np.flatnonzero(lower < upper)
    KI, KE = K[ineq], K[eq]
    lo, up, fE = lower[ineq], upper[ineq], lower[eq]
    width = up - lo

    q = KI @ u
    sl = np.maximum(q - lo, 1e-2 * width)
    su = np.maximum(up - q, 1e-2 * width)
    # duals of the size of a multiplier: a state-sized vector with the scale of K^{-1} B
    z0 = max(float(np.max(np.abs(u), initial=0.0)), 1.0) * float(np.mean(B.diagonal()) / np.mean(K.diagonal()))
    zl = np.full(len(ineq), z0)
    zu = np.full(len(ineq), z0)
    y = np.zeros(len(eq))
    m = 2 * len(ineq)
    scale_d = 1.0 + np.linalg.norm(load)
    scale_p = 1.0 + np.linalg.norm(np.concatenate([lower, upper]))

    def fraction_to_boundary(v, dv):
        neg = dv < 0
        return min(1.0, float(np.min(-v[neg] / dv[neg]))) if np.any(neg) else 1.0

    def multiplier():
        w = np.zeros(n)
        w[ineq] = zl - zu
        w[eq] = y
        return w

    steps = 0
    offered = np.inf
    for steps in range(1, max_steps + 1):
        rd = B @ u - load - KI.T @ (zl - zu) - KE.T @ y
        rpl = KI @ u - sl - lo
        rpu = KI @ u + su - up
        rE = KE @ u - fE
        mu = (sl @ zl + su @ zu) / m if m else 0.0
        if (np.linalg.norm(rd) <= rtol * scale_d
                and np.linalg.norm(np.concatenate([rpl, rpu, rE])) <= rtol * scale_p
                and mu <= rtol * rtol * scale_p):
            break
        if callback is not None and mu <= 0.1 * offered:
            offered = mu
            if callback(u, multiplier()):
                break
        D = zl / sl + zu / su
        H = B + KI.T @ sp.diags(D) @ KI
        kkt = sp.bmat([[H, KE.T], [KE, None]], format="csc") if len(eq) else sp.csc_matrix(H)
        lu = spla.splu(kkt)

        def direction(rcl, rcu):
            g = rcl / sl - (zl / sl) * rpl - rcu / su - (zu / su) * rpu
            rhs = -rd + KI.T @ g
            if len(eq):
                sol = lu.solve(np.concatenate([rhs, -rE]))
                du, dy = sol[:n], -sol[n:]
            else:
                du, dy = lu.solve(rhs), np.zeros(0)
            dsl = KI @ du + rpl
            dsu = -rpu - KI @ du
            dzl = (rcl - zl * dsl) / sl
            dzu = (rcu - zu * dsu) / su
            return du, dy, dsl, dsu, dzl, dzu

        aff = direction(-sl * zl, -su * zu)
        _, _, dsl, dsu, dzl, dzu = aff
        ap = min(fraction_to_boundary(sl, dsl), fraction_to_boundary(su, dsu))
        ad = min(fraction_to_boundary(zl, dzl), fraction_to_boundary(zu, dzu))
        mu_aff = ((sl + ap * dsl) @ (zl + ad * dzl) + (su + ap * dsu) @ (zu + ad * dzu)) / m if m else 0.0
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        du, dy, dsl, dsu, dzl, dzu = direction(
            sigma * mu - sl * zl - dsl * dzl, sigma * mu - su * zu - dsu * dzu
        )
        ap = 0.995 * min(fraction_to_boundary(sl, dsl), fraction_to_boundary(su, dsu), 1.0 / 0.995)
        ad = 0.995 * min(fraction_to_boundary(zl, dzl), fraction_to_boundary(zu, dzu), 1.0 / 0.995)
        u = u + ap * du
        sl = sl + ap * dsl
        su = su + ap * dsu
        zl = zl + ad * dzl
        zu = zu + ad * dzu
        y = y + ad * dy
    return u, multiplier(), steps


def solve_control_constrained(
    mesh: Mesh,
    rho: float,
    target: Field,
    f_minus,
    f_plus,
    c: float = 1.0,
    tol: float = 1e-5,
    max_iter: int = 100,
    rel_tol: float = DEFAULT_REL_TOL,
    method: str = "auto",
    system: FEMSystem | None = None,
    subdivisions: int | None = None,
    bound_subdivisions: int = 4,
    safeguard: bool = True,
) -> ControlVISolution:
    """Active-set iteration from ``u0 = (M + rho K)^{-1} load`` and ``w0 = 0``.

    Indices with ``f_-,i == f_+,i`` are allowed; their flux is pinned.
    Because ``K^{-1} (M + rho K) K^{-1}`` is not an M-matrix, the plain
    iteration can cycle. With ``safeguard`` a cycle (or ``max_iter`` plain
    updates) hands over to :func:`interior_point`, followed by a short
    active-set polish from its result; convergence is accepted only under
    the same feasibility and multiplier sign test.
    """
    if rho <= 0 or c <= 0:
        raise ValueError("rho and c must be positive")
    fem = system if system is not None else FEMSystem(mesh)
    if subdivisions is None:
        subdivisions = getattr(target, "quadrature_subdivisions", 1)
    load = fem.load(target, subdivisions)
    lower = bound_moments(f_minus, mesh, bound_subdivisions)
    upper = bound_moments(f_plus, mesh, bound_subdivisions)
    if np.any(lower > upper):
        raise ValueError("control bounds must satisfy f_- <= f_+ at every interior node")

    B = fem.system_matrix(rho)
    K = fem.K
    u = SPDSolver(B, rel_tol, method).solve(load)
    w = np.zeros_like(u)
    report = SolveReport(False, 0, tol=tol, c=c, rel_tol=rel_tol)
    u, w, sets, status = _active_set_loop(B, K, load, lower, upper, c, tol, u, w, max_iter, method, report)

    if status != "converged" and safeguard:
        polished = {}

        def polish(u_ip, w_ip):
            # a few active-set updates from the interior iterate; success is certified
            res = _active_set_loop(B, K, load, lower, upper, c, tol, u_ip, w_ip, 3, method, report)
            polished["last"] = res
            return res[3] == "converged"

        u_ip, w_ip, steps = interior_point(B, K, load, lower, upper, u, callback=polish)
        report.safeguard_steps += steps
        if polished.get("last", (None,) * 4)[3] != "converged":
            polish(u_ip, w_ip)
        u, w, sets, status = polished["last"]
    report.converged = status == "converged"
    if not report.converged:
        report.message = (
            f"active-set iteration did not converge ({status} after {report.iterations} updates)"
        )

    flux = K @ u
    report.feasibility = feasibility_violation(flux, lower, upper)
    report.complementarity = float(
        np.max(np.abs(complementarity_map(flux, w, lower, upper, c)), initial=0.0)
    )
    report.residual = float(np.max(np.abs(B @ u - K @ w - load), initial=0.0))
    return ControlVISolution(
        u=prolong_interior(u, mesh),
        w=w,
        flux=flux,
        report=report,
        active_minus=np.flatnonzero(sets[0]) if sets else np.array([], dtype=int),
        active_plus=np.flatnonzero(sets[1]) if sets else np.array([], dtype=int),
        lower=lower,
        upper=upper,
        u_int=u,
    )


def control_complementarity_residual(sol: ControlVISolution, f_minus=None, f_plus=None, mesh=None) -> float:
    """Max-norm of F2 with the flux in place of the state."""
    lower = sol.lower if f_minus is None else bound_moments(f_minus, mesh)
    upper = sol.upper if f_plus is None else bound_moments(f_plus, mesh)
    r = complementarity_map(sol.flux, sol.w, lower, upper, sol.report.c)
    return float(np.max(np.abs(r), initial=0.0))
