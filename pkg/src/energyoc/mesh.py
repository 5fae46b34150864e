"""Structured triangulations of the unit square."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of (0,1)^2.

    Nodes are numbered lexicographically by (y, x), i.e. node ``j*(n+1)+i``
    sits at ``(i/n, j/n)``. Elements are counter-clockwise node triples.
    """

    n_per_side: int
    nodes: np.ndarray  # (n_nodes, 2)
    elements: np.ndarray  # (n_elements, 3), int
    boundary_mask: np.ndarray  # (n_nodes,), bool
    h: float  # maximal element diameter
    interior: np.ndarray  # ascending indices of non-boundary nodes

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def spacing(self) -> float:
        """Grid spacing 1/n; the regularization coupling uses rho = spacing**2."""
        return 1.0 / self.n_per_side

    def element_areas(self) -> np.ndarray:
        """Signed areas of all elements."""
        p = self.nodes[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_structured_mesh(n: int) -> Mesh:
    """Uniform ``n x n`` grid, every cell cut along its lower-left to upper-right diagonal."""
    if int(n) != n or n < 1:
        raise ValueError(f"number of subdivisions must be a positive integer, got {n!r}")
    n = int(n)
    t = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(t, t)  # row index is y
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    n0 = j * (n + 1) + i
    n1 = n0 + 1
    n2 = n0 + n + 2
    n3 = n0 + n + 1
    # lower-right triangle then upper-left triangle of each cell
    elements = np.empty((2 * n * n, 3), dtype=np.int64)
    elements[0::2] = np.column_stack([n0, n1, n2])
    elements[1::2] = np.column_stack([n0, n2, n3])

    tol = 1e-14
    x, y = nodes[:, 0], nodes[:, 1]
    boundary = (x < tol) | (x > 1 - tol) | (y < tol) | (y > 1 - tol)
    interior = np.flatnonzero(~boundary)
    return Mesh(
        n_per_side=n,
        nodes=nodes,
        elements=elements,
        boundary_mask=boundary,
        h=float(np.sqrt(2.0) / n),
        interior=interior,
    )


def interior_indices(mesh: Mesh) -> np.ndarray:
    """Ascending indices of nodes not on the boundary; its length is dim V_h."""
    return mesh.interior


def coarse_fine_pair(n_coarse: int, factor: int = 4) -> tuple[Mesh, Mesh]:
    """Coarse mesh for the piecewise constant control and a ``factor``-times finer state mesh."""
    return build_structured_mesh(n_coarse), build_structured_mesh(factor * n_coarse)


def locate_elements(mesh: Mesh, points: np.ndarray) -> np.ndarray:
    """Index of the element of a structured mesh containing each point.

    Points on shared edges resolve to one of the adjacent elements.
    """
    n = mesh.n_per_side
    pts = np.asarray(points, dtype=float)
    s = pts * n
    i = np.clip(np.floor(s[:, 0]).astype(np.int64), 0, n - 1)
    j = np.clip(np.floor(s[:, 1]).astype(np.int64), 0, n - 1)
    lx = s[:, 0] - i
    ly = s[:, 1] - j
    upper = ly > lx
    return 2 * (j * n + i) + upper.astype(np.int64)


def restrict_nodal(values: np.ndarray, fine: Mesh, coarse: Mesh) -> np.ndarray:
    """Sample a nodal vector of ``fine`` at the nodes of a nested ``coarse`` mesh."""
    nf, nc = fine.n_per_side, coarse.n_per_side
    if nf % nc:
        raise ValueError(f"meshes are not nested: {nf} is not a multiple of {nc}")
    r = nf // nc
    grid = np.asarray(values).reshape(nf + 1, nf + 1)
    return grid[::r, ::r].ravel().copy()


def prolong_nodal(values: np.ndarray, coarse: Mesh, fine: Mesh) -> np.ndarray:
    """Piecewise linear interpolation of a coarse nodal vector at the nodes of a nested finer mesh."""
    nf, nc = fine.n_per_side, coarse.n_per_side
    if nf % nc:
        raise ValueError(f"meshes are not nested: {nf} is not a multiple of {nc}")
    values = np.asarray(values, dtype=float)
    el = coarse.elements[locate_elements(coarse, fine.nodes)]
    p = coarse.nodes[el]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    r = fine.nodes - p[:, 0]
    l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    v = values[el]
    return (1.0 - l1 - l2) * v[:, 0] + l1 * v[:, 1] + l2 * v[:, 2]
