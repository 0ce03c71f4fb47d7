"""Grünwald–Letnikov weights and the shifted (fractional Crank–Nicolson) quadrature.

The discrete Riemann–Liouville derivative at the shifted point
``t_{n - alpha/2}`` is

    D u^n = dt^{-alpha} * sum_{i=0}^{n} omega_{n-i} u^i

with ``omega_i`` the signed binomial coefficients of ``(1 - z)^alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, rgamma

__all__ = [
    "FractionalWeights",
    "PhiSequence",
    "grunwald_weights",
    "phi_sequence",
    "mittag_leffler",
    "log_mittag_leffler",
    "frac_derivative_apply",
    "frac_derivative_difference_form",
]

#: Hard cap on the number of Mittag-Leffler series terms.
ML_MAX_TERMS = 10_000
_LOG_EPS = math.log(1e-16)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FractionalWeights:
    """Weights ``omega_0..omega_n`` and their partial sums ``g_0..g_n``."""

    alpha: float
    omega: np.ndarray
    g: np.ndarray

    def __len__(self) -> int:
        return self.omega.size

    @property
    def n(self) -> int:
        return self.omega.size - 1


@dataclass(frozen=True)
class PhiSequence:
    """Auxiliary sequence ``phi_0..phi_n`` used by the discrete Grönwall bound."""

    alpha: float
    phi: np.ndarray

    def __len__(self) -> int:
        return self.phi.size


def grunwald_weights(alpha: float, n: int) -> FractionalWeights:
    """Return ``omega_0..omega_n`` and ``g_0..g_n`` for order ``alpha``.

    The weights use the recursion ``omega_i = (1 - (alpha + 1)/i) omega_{i-1}``;
    the Gamma-function closed form overflows past ``i ~ 170``.
    """
    _check_alpha(alpha)
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    factors = np.ones(n + 1)
    i = np.arange(1, n + 1, dtype=float)
    factors[1:] = 1.0 - (alpha + 1.0) / i
    omega = np.cumprod(factors)
    g = np.cumsum(omega)
    return FractionalWeights(alpha=alpha, omega=_readonly(omega), g=_readonly(g))


def phi_sequence(alpha: float, n: int, weights: FractionalWeights | None = None) -> PhiSequence:
    """Return ``phi_0..phi_n`` with ``phi_k = sum_{i=1}^k (g_{i-1} - g_i) phi_{k-i}``."""
    _check_alpha(alpha)
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if weights is None or weights.n < n or weights.alpha != alpha:
        weights = grunwald_weights(alpha, n)
    # g_{i-1} - g_i = -omega_i
    d = -weights.omega[1 : n + 1]
    phi = np.empty(n + 1)
    phi[0] = 1.0
    for k in range(1, n + 1):
        # sum_{i=1}^{k} d_i phi_{k-i}
        phi[k] = np.dot(d[:k], phi[k - 1 :: -1])
    return PhiSequence(alpha=alpha, phi=_readonly(phi))


def mittag_leffler(alpha: float, z: float) -> float:
    """One-parameter Mittag-Leffler function ``E_alpha(z)`` for ``z >= 0``.

    Summed term by term until the current term drops below ``1e-16`` of the
    partial sum. Raises :class:`OverflowError` if the series does not settle
    within :data:`ML_MAX_TERMS` terms or the sum leaves the float range.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if z < 0.0:
        raise ValueError(f"only z >= 0 is supported, got {z!r}")
    if z == 0.0:
        return 1.0

    logz = math.log(z)
    total = 1.0
    for k in range(1, ML_MAX_TERMS):
        log_term = k * logz - math.lgamma(1.0 + k * alpha)
        if log_term > 709.0:
            raise OverflowError(f"E_{alpha}({z}) exceeds the float range")
        term = math.exp(log_term)
        total += term
        if not math.isfinite(total):
            raise OverflowError(f"E_{alpha}({z}) exceeds the float range")
        if term < 1e-16 * total:
            return total
    raise OverflowError(f"E_{alpha}({z}) did not converge in {ML_MAX_TERMS} terms")


def log_mittag_leffler(alpha: float, z):
    """Natural log of ``E_alpha(z)`` for ``z >= 0``, finite far past float overflow.

    Accepts a scalar or an array of arguments. Uses the same series and
    truncation rule as :func:`mittag_leffler`, accumulated as a running
    log-sum-exp. Arguments whose series needs more than :data:`ML_MAX_TERMS`
    terms use the large-argument expansion
    ``E_alpha(z) ~ exp(z^(1/alpha)) / alpha - sum_k z^-k / Gamma(1 - k alpha)``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(zs < 0.0):
        raise ValueError("only z >= 0 is supported")
    out = np.zeros_like(zs)
    if alpha == 1.0:
        out[:] = zs
    else:
        # series terms peak near k = z^(1/alpha) / alpha; past the cap only the expansion applies
        with np.errstate(over="ignore"):
            peak = zs ** (1.0 / alpha) / alpha
        pos = np.flatnonzero((zs > 0.0) & (peak < ML_MAX_TERMS))
        big = np.flatnonzero(peak >= ML_MAX_TERMS)
        logz = np.log(zs[pos])
        done = np.zeros(pos.size, dtype=bool)
        running = np.zeros(pos.size)
        chunk = 256
        for start in range(1, ML_MAX_TERMS, chunk):
            todo = np.flatnonzero(~done)
            if todo.size == 0:
                break
            k = np.arange(start, min(start + chunk, ML_MAX_TERMS), dtype=float)
            raw = k[None, :] * logz[todo, None] - gammaln(1.0 + k * alpha)[None, :]
            seeded = raw.copy()
            seeded[:, 0] = np.logaddexp(running[todo], raw[:, 0])
            partial = np.logaddexp.accumulate(seeded, axis=1)
            stop = raw < partial + _LOG_EPS
            hit = stop.any(axis=1)
            first = np.argmax(stop, axis=1)
            rows = todo[hit]
            out[pos[rows]] = partial[hit, first[hit]]
            done[rows] = True
            running[todo] = partial[:, -1]
        big = np.concatenate([big, pos[~done]])
        if big.size:
            zb = zs[big]
            lead = zb ** (1.0 / alpha) - math.log(alpha)
            tail = sum(zb ** (-k) * rgamma(1.0 - k * alpha) for k in range(1, 4))
            out[big] = lead + np.log1p(-tail * np.exp(-lead))
    return float(out[0]) if np.ndim(z) == 0 else out


def _as_history(history: Sequence | np.ndarray) -> np.ndarray:
    arr = np.asarray(history, dtype=float)
    if arr.ndim == 0:
        raise TypeError("history must be a sequence of values")
    return arr


def frac_derivative_apply(weights: FractionalWeights, dt: float, history) -> np.ndarray | float:
    """Discrete fractional derivative ``dt^{-alpha} sum_i omega_{n-i} u^i``.

    ``history`` holds ``u^0..u^n`` along its first axis; trailing axes are
    treated elementwise.
    """
    u = _as_history(history)
    n = u.shape[0] - 1
    if n < 0 or n > weights.n:
        raise ValueError(f"history of length {n + 1} does not fit weights of length {len(weights)}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    w = weights.omega[n::-1]
    out = np.tensordot(w, u, axes=(0, 0)) * dt ** (-weights.alpha)
    return float(out) if np.ndim(out) == 0 else out


def frac_derivative_difference_form(weights: FractionalWeights, dt: float, history) -> np.ndarray | float:
    """Same operator written as ``sum_i g_{n-i} (u^i - u^{i-1}) + g_n u^0``."""
    u = _as_history(history)
    n = u.shape[0] - 1
    if n < 0 or n > weights.n:
        raise ValueError(f"history of length {n + 1} does not fit weights of length {len(weights)}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    acc = weights.g[n] * u[0]
    if n > 0:
        acc = acc + np.tensordot(weights.g[n - 1 :: -1], np.diff(u, axis=0), axes=(0, 0))
    out = acc * dt ** (-weights.alpha)
    return float(out) if np.ndim(out) == 0 else out
