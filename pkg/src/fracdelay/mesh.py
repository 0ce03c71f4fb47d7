"""Structured simplicial meshes of the unit square and unit cube."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Kuhn (Freudenthal) triangulation of ``[0, 1]^dim``.

    Every square is split along its ``(0,0)-(1,1)`` diagonal and every cube into
    six tetrahedra sharing the main diagonal, so neighbouring cells match.
    Vertex ``(i, j[, k])`` has index ``i + (d+1) j [+ (d+1)^2 k]``.
    """

    dim: int
    divisions: int
    vertices: np.ndarray  # (nverts, dim)
    cells: np.ndarray  # (ncells, dim + 1)

    @property
    def h(self) -> float:
        """Cell diameter (longest edge is the cube diagonal)."""
        return math.sqrt(self.dim) / self.divisions

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    def lattice(self) -> np.ndarray:
        """Integer lattice coordinates of the vertices."""
        return np.rint(self.vertices * self.divisions).astype(np.int64)

    def signed_volumes(self) -> np.ndarray:
        x = self.vertices[self.cells]
        J = x[:, 1:, :] - x[:, :1, :]
        return np.linalg.det(J) / math.factorial(self.dim)


def _kuhn_offsets(dim: int) -> list[np.ndarray]:
    """Unit-cube corner offsets of each Kuhn simplex, positively oriented."""
    simplices = []
    for perm in itertools.permutations(range(dim)):
        corner = np.zeros(dim, dtype=np.int64)
        verts = [corner.copy()]
        for axis in perm:
            corner[axis] = 1
            verts.append(corner.copy())
        verts = np.array(verts)
        if np.linalg.det((verts[1:] - verts[0]).astype(float)) < 0:
            verts[[1, 2]] = verts[[2, 1]]
        simplices.append(verts)
    return simplices


def build_mesh(dim: int, divisions: int) -> Mesh:
    """Structured mesh with ``divisions`` cells per side."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if divisions < 1:
        raise ValueError(f"divisions must be a positive integer, got {divisions}")
    d = divisions
    n1 = d + 1
    axes = np.arange(n1)
    grid = np.stack(np.meshgrid(*([axes] * dim), indexing="ij"), axis=-1)
    # first coordinate varies fastest
    lattice = grid.transpose(*reversed(range(dim)), dim).reshape(-1, dim)
    vertices = lattice / d

    strides = n1 ** np.arange(dim)
    origins = np.stack(np.meshgrid(*([np.arange(d)] * dim), indexing="ij"), axis=-1)
    origins = origins.transpose(*reversed(range(dim)), dim).reshape(-1, dim)
    cells = []
    for offs in _kuhn_offsets(dim):
        cells.append((origins[:, None, :] + offs[None, :, :]) @ strides)
    # keep the simplices of one hypercube contiguous
    cells = np.stack(cells, axis=1).reshape(-1, dim + 1)
    return Mesh(dim=dim, divisions=d, vertices=vertices, cells=cells.astype(np.int64))
