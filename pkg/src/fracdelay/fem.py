"""Continuous P1/P2 Lagrange spaces with homogeneous Dirichlet conditions.

Matrices are assembled over all degrees of freedom and then restricted to the
free (interior) ones. Pointwise callables take coordinates stacked along the
first axis, ``x[0], x[1][, x[2]]``, each with an arbitrary trailing shape.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh, build_mesh
from .quadrature import simplex_rule

__all__ = [
    "ConvergenceError",
    "FeSpace",
    "build_space",
    "reference_basis",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_load",
    "ritz_project",
    "l2_error",
    "spd_solve",
    "dense_solve",
]

Pointwise = Callable[[np.ndarray], np.ndarray]

#: Cells handled per vectorised block during quadrature loops.
CELL_BLOCK = 32768


class ConvergenceError(RuntimeError):
    """An iterative solve did not reach its tolerance."""


def _local_edges(dim: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(dim + 1), 2))


def reference_basis(degree: int, dim: int, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange basis on the unit simplex.

    Returns values ``(nloc, npts)`` and reference gradients ``(nloc, npts, dim)``.
    Local order: vertices, then edge midpoints in lexicographic vertex-pair order.
    """
    pts = np.atleast_2d(points)
    npts = pts.shape[0]
    lam = np.empty((dim + 1, npts))
    lam[1:] = pts.T
    lam[0] = 1.0 - pts.sum(axis=1)
    dlam = np.vstack([-np.ones(dim), np.eye(dim)])  # (dim+1, dim)

    if degree == 1:
        vals = lam
        grads = np.broadcast_to(dlam[:, None, :], (dim + 1, npts, dim)).copy()
    elif degree == 2:
        edges = _local_edges(dim)
        nloc = dim + 1 + len(edges)
        vals = np.empty((nloc, npts))
        grads = np.empty((nloc, npts, dim))
        vals[: dim + 1] = lam * (2.0 * lam - 1.0)
        grads[: dim + 1] = (4.0 * lam - 1.0)[:, :, None] * dlam[:, None, :]
        for k, (a, b) in enumerate(edges, start=dim + 1):
            vals[k] = 4.0 * lam[a] * lam[b]
            grads[k] = 4.0 * (lam[a][:, None] * dlam[b] + lam[b][:, None] * dlam[a])
    else:
        raise ValueError(f"degree must be 1 or 2, got {degree}")
    return vals, grads


@dataclass(frozen=True, eq=False)
class FeSpace:
    """Lagrange space of ``degree`` 1 or 2 on a structured mesh.

    Degrees of freedom sit on the lattice of spacing ``1 / (degree * divisions)``,
    so there are ``(degree * divisions + 1)^dim`` of them before the boundary is
    removed.
    """

    mesh: Mesh
    degree: int
    dof_coords: np.ndarray
    cell_dofs: np.ndarray
    interior_mask: np.ndarray

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def num_dofs(self) -> int:
        return self.dof_coords.shape[0]

    @cached_property
    def free(self) -> np.ndarray:
        return np.flatnonzero(self.interior_mask)

    @property
    def num_free(self) -> int:
        return int(self.free.size)

    @cached_property
    def geometry(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Affine maps ``x = x0 + J xi``: returns ``(x0, J, invJ, |det J|)``."""
        x = self.mesh.vertices[self.mesh.cells]
        x0 = x[:, 0, :]
        J = np.transpose(x[:, 1:, :] - x0[:, None, :], (0, 2, 1))
        return x0, J, np.linalg.inv(J), np.abs(np.linalg.det(J))

    def extend(self, coeffs: np.ndarray) -> np.ndarray:
        """Free-dof coefficients to a full vector with zero boundary values."""
        full = np.zeros(self.num_dofs)
        full[self.free] = coeffs
        return full

    def interpolate(self, func: Pointwise) -> np.ndarray:
        """Nodal interpolant restricted to the free dofs."""
        return np.asarray(func(self.dof_coords[self.free].T), dtype=float)

    def blocks(self, rule_degree: int):
        """Yield ``(cells, x_q, wdet, phi, grad_phi)`` per block of cells.

        ``x_q`` has shape ``(dim, ncells, nq)``, ``wdet`` ``(ncells, nq)`` holds
        quadrature weights times ``|det J|`` and ``grad_phi`` is the physical
        gradient ``(ncells, nq, nloc, dim)``; ``phi`` is ``(nloc, nq)``.
        """
        rule = simplex_rule(self.dim, rule_degree)
        phi, dphi = reference_basis(self.degree, self.dim, rule.points)
        x0, J, invJ, det = self.geometry
        for start in range(0, self.mesh.num_cells, CELL_BLOCK):
            sl = slice(start, start + CELL_BLOCK)
            xq = x0[sl, None, :] + np.einsum("cij,qj->cqi", J[sl], rule.points)
            wdet = det[sl, None] * rule.weights[None, :]
            # grad = J^{-T} grad_ref
            gphys = np.einsum("cji,aqj->cqai", invJ[sl], dphi)
            yield sl, np.moveaxis(xq, -1, 0), wdet, phi, gphys

    def values_at_quadrature(self, full: np.ndarray, rule_degree: int) -> np.ndarray:
        """FE function with full coefficient vector ``full`` at all quadrature points."""
        rule = simplex_rule(self.dim, rule_degree)
        phi, _ = reference_basis(self.degree, self.dim, rule.points)
        return full[self.cell_dofs] @ phi


def build_space(mesh: Mesh | tuple[int, int], degree: int) -> FeSpace:
    """Lagrange space on ``mesh`` (or on ``build_mesh(*mesh)``)."""
    if not isinstance(mesh, Mesh):
        mesh = build_mesh(*mesh)
    if degree not in (1, 2):
        raise ValueError(f"degree must be 1 or 2, got {degree}")
    dim, d = mesh.dim, mesh.divisions
    n1 = degree * d + 1
    strides = n1 ** np.arange(dim)
    lattice = mesh.lattice()
    if degree == 1:
        cell_nodes = lattice[mesh.cells]
    else:
        verts = 2 * lattice[mesh.cells]  # (ncells, dim+1, dim) on the refined lattice
        mids = [(verts[:, a] + verts[:, b]) // 2 for a, b in _local_edges(dim)]
        cell_nodes = np.concatenate([verts, np.stack(mids, axis=1)], axis=1)
    cell_dofs = cell_nodes @ strides

    axes = np.arange(n1)
    grid = np.stack(np.meshgrid(*([axes] * dim), indexing="ij"), axis=-1)
    nodes = grid.transpose(*reversed(range(dim)), dim).reshape(-1, dim)
    interior = np.all((nodes > 0) & (nodes < n1 - 1), axis=1)
    return FeSpace(
        mesh=mesh,
        degree=degree,
        dof_coords=nodes / (n1 - 1),
        cell_dofs=cell_dofs.astype(np.int64),
        interior_mask=interior,
    )


def _scatter_matrix(space: FeSpace, local: np.ndarray, full: bool) -> sp.csr_matrix:
    nloc = space.cell_dofs.shape[1]
    rows = np.repeat(space.cell_dofs, nloc, axis=1).ravel()
    cols = np.tile(space.cell_dofs, (1, nloc)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(space.num_dofs,) * 2).tocsr()
    A.sum_duplicates()
    if full:
        return A
    free = space.free
    return A[free][:, free].tocsr()


def assemble_mass(space: FeSpace, full: bool = False) -> sp.csr_matrix:
    """Mass matrix ``<phi_j, phi_i>``; free dofs only unless ``full``."""
    rule = simplex_rule(space.dim, 2 * space.degree)
    phi, _ = reference_basis(space.degree, space.dim, rule.points)
    ref = (phi * rule.weights) @ phi.T
    det = space.geometry[3]
    return _scatter_matrix(space, det[:, None, None] * ref[None], full)


def assemble_stiffness(space: FeSpace, full: bool = False) -> sp.csr_matrix:
    """Stiffness matrix ``<grad phi_j, grad phi_i>``; free dofs only unless ``full``."""
    nloc = space.cell_dofs.shape[1]
    local = np.empty((space.mesh.num_cells, nloc, nloc))
    for sl, _, wdet, _, g in space.blocks(2 * (space.degree - 1)):
        local[sl] = np.einsum("cq,cqai,cqbi->cab", wdet, g, g)
    return _scatter_matrix(space, local, full)


def _scatter_vector(space: FeSpace, local: np.ndarray, full: bool) -> np.ndarray:
    b = np.bincount(space.cell_dofs.ravel(), weights=local.ravel(), minlength=space.num_dofs)
    return b if full else b[space.free]


def load_from_values(space: FeSpace, values: np.ndarray, rule_degree: int, full: bool = False) -> np.ndarray:
    """``int g phi_i`` with ``g`` given at the quadrature points of every cell."""
    rule = simplex_rule(space.dim, rule_degree)
    phi, _ = reference_basis(space.degree, space.dim, rule.points)
    det = space.geometry[3]
    local = (values * det[:, None] * rule.weights[None, :]) @ phi.T
    return _scatter_vector(space, local, full)


def assemble_load(space: FeSpace, g: Pointwise, full: bool = False) -> np.ndarray:
    """Load vector ``int g phi_i``, with a rule exact to degree ``2 r + 1``."""
    deg = 2 * space.degree + 1
    nloc = space.cell_dofs.shape[1]
    local = np.empty((space.mesh.num_cells, nloc))
    for sl, xq, wdet, phi, _ in space.blocks(deg):
        gv = np.broadcast_to(np.asarray(g(xq), dtype=float), wdet.shape)
        local[sl] = (gv * wdet) @ phi.T
    return _scatter_vector(space, local, full)


def ritz_project(
    space: FeSpace,
    stiffness: sp.spmatrix,
    grad_u: Pointwise,
    rel_tol: float = 1e-12,
) -> np.ndarray:
    """Coefficients of the Ritz projection, from the analytic gradient of the target."""
    nloc = space.cell_dofs.shape[1]
    local = np.empty((space.mesh.num_cells, nloc))
    for sl, xq, wdet, _, g in space.blocks(2 * space.degree + 1):
        gu = np.asarray(grad_u(xq), dtype=float)  # (dim, ncells, nq)
        gu = np.broadcast_to(gu, (space.dim,) + wdet.shape)
        local[sl] = np.einsum("cq,icq,cqai->ca", wdet, gu, g)
    b = _scatter_vector(space, local, full=False)
    if not np.any(b):
        return np.zeros_like(b)
    return spd_solve(stiffness, b, rel_tol)


def l2_error(space: FeSpace, coeffs: np.ndarray, exact: Pointwise) -> float:
    """``||u_h - exact||_{L2}``, with ``coeffs`` over the free dofs."""
    full = space.extend(coeffs)
    total = 0.0
    for sl, xq, wdet, phi, _ in space.blocks(2 * space.degree + 2):
        uh = full[space.cell_dofs[sl]] @ phi
        diff = uh - np.asarray(exact(xq), dtype=float)
        total += float(np.sum(diff * diff * wdet))
    return math.sqrt(total)


def spd_solve(
    matrix: sp.spmatrix,
    rhs: np.ndarray,
    rel_tol: float = 1e-12,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients with a ``10 n`` iteration cap."""
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.size
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros(n)
    diag = matrix.diagonal()
    precond = spla.LinearOperator((n, n), matvec=lambda r: r / diag, dtype=float)
    x, info = spla.cg(matrix, rhs, x0=x0, rtol=rel_tol, atol=0.0, maxiter=10 * n, M=precond)
    if info != 0:
        res = np.linalg.norm(rhs - matrix @ x) / bnorm
        raise ConvergenceError(f"CG stopped after {10 * n} iterations at relative residual {res:.3e}")
    return x


def dense_solve(matrix, rhs: np.ndarray) -> np.ndarray:
    """Cholesky solve for small SPD systems (up to 500 unknowns)."""
    A = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
    if A.shape[0] > 500:
        raise ValueError("dense_solve is limited to 500 unknowns")
    return scipy.linalg.cho_solve(scipy.linalg.cho_factor(A), rhs)
