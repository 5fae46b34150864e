"""Finite element matrices and load vectors for continuous piecewise linear elements."""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, locate_elements
from .quadrature import QuadratureRule, default_rule

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]

_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


class AssemblyError(ValueError):
    pass


def element_geometry(mesh: Mesh):
    """Areas and barycentric gradients, shape (n_el,) and (n_el, 3, 2)."""
    p = mesh.nodes[mesh.elements]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(np.abs(det) <= 1e-300) or np.any(det < 0):
        raise AssemblyError("degenerate or clockwise element")
    area = 0.5 * det
    # gradient of lambda_i is the rotated opposite edge over 2|T|
    grads = np.empty((len(det), 3, 2))
    for i in range(3):
        a = p[:, (i + 1) % 3]
        b = p[:, (i + 2) % 3]
        e = b - a
        grads[:, i, 0] = e[:, 1] / det
        grads[:, i, 1] = -e[:, 0] / det
    # sign: lambda_i increases towards vertex i
    return area, -grads


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    el = mesh.elements
    rows = np.repeat(el, 3, axis=1).ravel()
    cols = np.tile(el, (1, 3)).ravel()
    n = mesh.n_nodes
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """K[j, k] = integral of grad phi_k . grad phi_j over all nodes."""
    area, grads = element_geometry(mesh)
    local = area[:, None, None] * np.einsum("eid,ejd->eij", grads, grads)
    return _scatter(mesh, local)


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Consistent mass matrix M[j, k] = integral of phi_k phi_j."""
    area, _ = element_geometry(mesh)
    local = area[:, None, None] * _MASS_REF[None]
    return _scatter(mesh, local)


def quadrature_points(mesh: Mesh, quad: QuadratureRule):
    """Physical quadrature points (n_el, n_q, 2) and weights (n_el, n_q)."""
    area, _ = element_geometry(mesh)
    p = mesh.nodes[mesh.elements]  # (n_el, 3, 2)
    xq = np.einsum("qi,eid->eqd", quad.points, p)
    wq = area[:, None] * quad.weights[None, :]
    return xq, wq


def assemble_load(
    mesh: Mesh, f: Field, quad: QuadratureRule | None = None, subdivisions: int = 1
) -> np.ndarray:
    """Vector of integrals of ``f * phi_j`` over all nodes."""
    if quad is None:
        quad = default_rule(subdivisions)
    elif subdivisions > 1:
        quad = quad.subdivide(subdivisions)
    xq, wq = quadrature_points(mesh, quad)
    vals = np.asarray(f(xq[..., 0], xq[..., 1]), dtype=float)
    vals = np.broadcast_to(vals, wq.shape)
    local = np.einsum("eq,qi->ei", vals * wq, quad.points)
    b = np.zeros(mesh.n_nodes)
    np.add.at(b, mesh.elements.ravel(), local.ravel())
    return b


def assemble_mixed_mass(fine: Mesh, coarse: Mesh) -> sp.csr_matrix:
    """Rectangular matrix with entries integral over coarse element l of phi_j (fine node j)."""
    if fine.n_per_side % coarse.n_per_side:
        raise ValueError(
            f"meshes are not nested: {fine.n_per_side} is not a multiple of {coarse.n_per_side}"
        )
    area, _ = element_geometry(fine)
    centroids = fine.nodes[fine.elements].mean(axis=1)
    owner = locate_elements(coarse, centroids)
    # every fine vertex must lie in the owning coarse triangle
    cverts = coarse.nodes[coarse.elements[owner]]  # (n_el, 3, 2)
    fverts = fine.nodes[fine.elements]
    d1 = cverts[:, 1] - cverts[:, 0]
    d2 = cverts[:, 2] - cverts[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    for k in range(3):
        r = fverts[:, k] - cverts[:, 0]
        l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
        l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
        if np.any(np.minimum(np.minimum(l1, l2), 1.0 - l1 - l2) < -1e-12):
            raise ValueError("fine elements are not contained in coarse elements")
    rows = fine.elements.ravel()
    cols = np.repeat(owner, 3)
    vals = np.repeat(area / 3.0, 3)
    B = sp.coo_matrix((vals, (rows, cols)), shape=(fine.n_nodes, coarse.n_elements)).tocsr()
    B.sum_duplicates()
    B.sort_indices()
    return B


def restrict_interior(A, mesh: Mesh):
    """Drop boundary rows (and columns for square matrices) of a matrix or vector."""
    idx = mesh.interior
    if sp.issparse(A):
        A = A.tocsr()
        if A.shape[0] == A.shape[1] == mesh.n_nodes:
            return A[idx][:, idx].tocsr()
        return A[idx].tocsr()
    A = np.asarray(A)
    if A.ndim == 2 and A.shape[0] == A.shape[1] == mesh.n_nodes:
        return A[np.ix_(idx, idx)]
    return A[idx]


def prolong_interior(values: np.ndarray, mesh: Mesh) -> np.ndarray:
    """Embed interior coefficients into a full nodal vector with zero boundary values."""
    full = np.zeros(mesh.n_nodes)
    full[mesh.interior] = values
    return full


class FEMSystem:
    """Assembled matrices of one mesh, restricted to the interior nodes.

    ``K`` and ``M`` are the interior stiffness and mass matrices; the full
    versions stay available as ``K_full`` and ``M_full``.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.K_full = assemble_stiffness(mesh)
        self.M_full = assemble_mass(mesh)
        self.K = restrict_interior(self.K_full, mesh)
        self.M = restrict_interior(self.M_full, mesh)

    @property
    def dofs(self) -> int:
        return len(self.mesh.interior)

    def load(self, f: Field, subdivisions: int = 1) -> np.ndarray:
        return restrict_interior(assemble_load(self.mesh, f, subdivisions=subdivisions), self.mesh)

    def system_matrix(self, rho: float) -> sp.csr_matrix:
        return (self.M + rho * self.K).tocsr()
