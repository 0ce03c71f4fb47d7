"""Quadrature rules on the reference simplex.

Rules are collapsed (conical) products of Gauss–Jacobi rules, exact for
polynomials of any requested total degree.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import roots_jacobi


class SimplexRule(NamedTuple):
    points: np.ndarray  # (npts, dim) reference coordinates
    weights: np.ndarray  # (npts,), summing to the reference volume 1/dim!


def _gauss_jacobi01(n: int, a: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, 1] for the weight ``(1 - t)^a``."""
    x, w = roots_jacobi(n, a, 0.0)
    return (1.0 + x) / 2.0, w / 2.0 ** (a + 1.0)


@lru_cache(maxsize=None)
def simplex_rule(dim: int, degree: int) -> SimplexRule:
    """Rule on the unit simplex exact for polynomials of total degree ``degree``."""
    if dim not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    n = max(1, (degree + 2) // 2)
    u, wu = _gauss_jacobi01(n, 0.0)
    if dim == 1:
        pts, wts = u[:, None], wu
    elif dim == 2:
        v, wv = _gauss_jacobi01(n, 1.0)
        U, V = np.meshgrid(u, v, indexing="ij")
        pts = np.stack([U * (1.0 - V), V], axis=-1).reshape(-1, 2)
        wts = np.outer(wu, wv).ravel()
    else:
        v, wv = _gauss_jacobi01(n, 1.0)
        s, ws = _gauss_jacobi01(n, 2.0)
        U, V, S = np.meshgrid(u, v, s, indexing="ij")
        pts = np.stack([U * (1.0 - V) * (1.0 - S), V * (1.0 - S), S], axis=-1).reshape(-1, 3)
        wts = np.einsum("i,j,k->ijk", wu, wv, ws).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return SimplexRule(pts, wts)
