"""Quadrature rules on triangles in barycentric form."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points with weights relative to the element area (they sum to 1)."""

    points: np.ndarray  # (n_points, 3)
    weights: np.ndarray  # (n_points,)
    degree: int

    def subdivide(self, s: int) -> "QuadratureRule":
        """Composite rule on the ``s**2`` congruent subtriangles of the element."""
        if s < 1:
            raise ValueError("subdivisions must be >= 1")
        if s == 1:
            return self
        # sub-triangle vertices in (xi, eta) reference coordinates
        verts = []
        for i in range(s):
            for j in range(s - i):
                verts.append([(i, j), (i + 1, j), (i, j + 1)])
                if i + j < s - 1:
                    verts.append([(i + 1, j), (i + 1, j + 1), (i, j + 1)])
        verts = np.asarray(verts, dtype=float) / s  # (s*s, 3, 2)
        ref = self.points[:, 1:]  # (xi, eta) = (lambda_1, lambda_2)
        phys = []
        for tri in verts:
            a, b, c = tri
            xy = a + ref[:, :1] * (b - a) + ref[:, 1:] * (c - a)
            phys.append(xy)
        phys = np.concatenate(phys)
        bary = np.column_stack([1.0 - phys.sum(axis=1), phys])
        weights = np.tile(self.weights, len(verts)) / len(verts)
        return QuadratureRule(bary, weights, self.degree)


@lru_cache(maxsize=None)
def dunavant5() -> QuadratureRule:
    """Seven-point rule exact for polynomials of degree 5."""
    r15 = np.sqrt(15.0)
    a1 = (6.0 - r15) / 21.0
    a2 = (6.0 + r15) / 21.0
    w1 = (155.0 - r15) / 1200.0
    w2 = (155.0 + r15) / 1200.0
    pts = [(1 / 3, 1 / 3, 1 / 3)]
    wts = [9.0 / 40.0]
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        pts += [(b, a, a), (a, b, a), (a, a, b)]
        wts += [w, w, w]
    return QuadratureRule(np.array(pts), np.array(wts), 5)


@lru_cache(maxsize=None)
def collapsed_gauss(order: int) -> QuadratureRule:
    """Tensor Gauss-Legendre rule mapped onto the triangle by the Duffy transform.

    Exact for degree ``2*order - 2`` polynomials; used as an independent
    high-order reference.
    """
    g, w = np.polynomial.legendre.leggauss(order)
    g = 0.5 * (g + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(g, g, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    xi = u.ravel()
    eta = (v * (1.0 - u)).ravel()
    weights = (wu * wv * (1.0 - u)).ravel() * 2.0  # reference area is 1/2
    bary = np.column_stack([1.0 - xi - eta, xi, eta])
    return QuadratureRule(bary, weights, 2 * order - 2)


def default_rule(subdivisions: int = 1) -> QuadratureRule:
    return dunavant5().subdivide(subdivisions)
