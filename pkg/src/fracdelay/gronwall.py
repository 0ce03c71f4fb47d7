"""Executable form of the discrete fractional Grönwall inequality with delay.

Besides evaluating the a-priori bound, this module generates the extremal
sequence (the hypothesis inequality taken with equality) and checks the two
auxiliary lemmas behind the bound on small dense problems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fracquad import (
    FractionalWeights,
    frac_derivative_apply,
    grunwald_weights,
    log_mittag_leffler,
    mittag_leffler,
    phi_sequence,
)

__all__ = [
    "StepRestrictionError",
    "GronwallParams",
    "LemmaReport",
    "gronwall_bound",
    "log_gronwall_bound",
    "bound_sequence",
    "domination_ratio",
    "recursion_oracle",
    "lemma2_matrix",
    "lemma2_check",
    "lemma3_check",
]


class StepRestrictionError(ValueError):
    """The time step violates ``dt <= dt_star`` (or makes a step unsolvable)."""


@dataclass(frozen=True)
class GronwallParams:
    alpha: float
    dt: float
    lambdas: tuple[float, float, float, float, float]
    m: int
    M_init: float = 0.0
    f_max: float = 0.0
    _weights: FractionalWeights = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.lambdas) != 5:
            raise ValueError("exactly five lambda coefficients are required")
        if any(lam < 0 for lam in self.lambdas):
            raise ValueError("lambda coefficients must be non-negative")
        if self.m < 1:
            raise ValueError("delay steps m must be a positive integer")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.M_init < 0 or self.f_max < 0:
            raise ValueError("M_init and f_max must be non-negative")
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        object.__setattr__(self, "_weights", grunwald_weights(self.alpha, self.m + 1))

    @property
    def lam(self) -> float:
        """Aggregated coefficient in the Mittag-Leffler argument."""
        g = self._weights.g
        m = self.m
        l1, l2, l3, l4, l5 = self.lambdas
        return (
            l1
            + l2 / (g[0] - g[1])
            + l3 / (g[1] - g[2])
            + l4 / (g[m - 1] - g[m])
            + l5 / (g[m] - g[m + 1])
        )

    @property
    def dt_star(self) -> float:
        l1 = self.lambdas[0]
        if l1 == 0:
            return math.inf
        return (1.0 / (2.0 * l1)) ** (1.0 / self.alpha)

    def with_data(self, M_init: float, f_max: float) -> "GronwallParams":
        return GronwallParams(self.alpha, self.dt, self.lambdas, self.m, M_init, f_max)


def _psi(params: GronwallParams, n: int) -> tuple[float, float]:
    """Return ``(Psi_n, z_n)`` where ``z_n`` is the Mittag-Leffler argument."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if params.dt > params.dt_star:
        raise StepRestrictionError(
            f"dt={params.dt:g} exceeds dt*={params.dt_star:.6g}"
        )
    a = params.alpha
    _, l2, l3, l4, l5 = params.lambdas
    M = params.M_init
    tna = (n * params.dt) ** a
    dta = params.dt**a
    ratio = math.gamma(a) * tna / math.gamma(1.0 + a)
    psi = (l4 + l5) * ratio * M + params.f_max * ratio + 2.0 * M + l2 * M * dta + 2.0 * l3 * M * dta
    return psi, 2.0 * math.gamma(a) * params.lam * tna


def gronwall_bound(params: GronwallParams, n: int) -> float:
    """Upper bound ``2 Psi_n E_alpha(2 Gamma(alpha) lam t_n^alpha)`` on ``u^n``."""
    psi, z = _psi(params, n)
    return 2.0 * psi * mittag_leffler(params.alpha, z)


def log_gronwall_bound(params: GronwallParams, n: int) -> float:
    """Natural log of :func:`gronwall_bound`; stays finite where the bound overflows."""
    psi, z = _psi(params, n)
    if psi == 0.0:
        return -math.inf
    return math.log(2.0 * psi) + log_mittag_leffler(params.alpha, z)


def bound_sequence(params: GronwallParams, initial, f, log: bool = False) -> np.ndarray:
    """Bounds for ``n = 1..len(f)`` with ``M`` and running ``max f^j`` taken from the data."""
    initial = np.asarray(initial, dtype=float)
    f = np.asarray(f, dtype=float)
    M = float(initial.max())
    fmax = np.maximum.accumulate(f)
    fn = log_gronwall_bound if log else gronwall_bound
    return np.array([fn(params.with_data(M, float(fmax[n - 1])), n) for n in range(1, f.size + 1)])


def domination_ratio(params: GronwallParams, initial, f) -> float:
    """``max_n u^n / bound_n`` for the extremal sequence, computed in log space.

    Returns 0 when the extremal sequence vanishes identically.
    """
    logu = recursion_oracle(params, initial, f, log=True)
    logb = bound_sequence(params, initial, f, log=True)
    pos = np.isfinite(logu)
    if not np.any(pos):
        return 0.0
    return float(np.exp(np.max(logu[pos] - logb[pos])))


_RESCALE = 1e150


def recursion_oracle(params: GronwallParams, initial, f, log: bool = False) -> np.ndarray:
    """Largest sequence obeying the Grönwall hypothesis, i.e. with equality.

    ``initial`` holds ``u^{-m}..u^0`` and ``f`` holds ``f^1..f^n``; returns
    ``u^1..u^n``. Delayed taps that would fall below ``-m`` read ``u^{-m}``.

    With ``log=True`` the recursion is run on a rescaled copy (it is linear in
    the data) and ``log(u^n)`` is returned, which stays finite when ``u^n``
    itself would overflow.
    """
    m = params.m
    initial = np.asarray(initial, dtype=float)
    f = np.asarray(f, dtype=float)
    if initial.size != m + 1:
        raise ValueError(f"initial segment must hold m+1={m + 1} values, got {initial.size}")
    if np.any(initial < 0) or np.any(f < 0):
        raise ValueError("initial data and forcing must be non-negative")
    n = f.size
    l1, l2, l3, l4, l5 = params.lambdas
    dta = params.dt**params.alpha
    denom = 1.0 - dta * l1
    if denom <= 0:
        raise StepRestrictionError(f"dt^alpha * lambda_1 = {dta * l1:g} >= 1; step unsolvable")

    omega = grunwald_weights(params.alpha, n).omega
    # u[k + m] stores u^k / scale for k = -m..n
    u = np.zeros(n + m + 1)
    u[: m + 1] = initial
    scale = 1.0
    log_scale = 0.0
    out = np.empty(n)

    def at(k: int) -> float:
        return u[max(k, -m) + m]

    for j in range(1, n + 1):
        taps = l2 * at(j - 1) + l3 * at(j - 2) + l4 * at(j - m) + l5 * at(j - m - 1) + f[j - 1] / scale
        # sum_{i=0}^{j-1} omega_{j-i} u^i
        tail = np.dot(omega[j:0:-1], u[m : m + j])
        u[m + j] = (dta * taps - tail) / denom
        if not log:
            out[j - 1] = u[m + j]
            if not np.isfinite(out[j - 1]):
                raise OverflowError(f"extremal sequence overflows at step {j}; use log=True")
            continue
        with np.errstate(divide="ignore"):
            out[j - 1] = np.log(u[m + j]) + log_scale
        if u[m + j] > _RESCALE:
            u /= _RESCALE
            scale *= _RESCALE
            log_scale += math.log(_RESCALE)
    return out


@dataclass
class LemmaReport:
    passed: bool
    max_violation: float
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.passed


def lemma2_matrix(alpha: float, dt: float, mu: float, n: int) -> np.ndarray:
    """Dense ``n x n`` matrix ``2 mu dt^alpha [phi_{j-i}]_{j>i}``."""
    phi = phi_sequence(alpha, n).phi
    i, j = np.indices((n, n))
    W = np.where(j > i, phi[np.clip(j - i, 0, n)], 0.0)
    return 2.0 * mu * dt**alpha * W


def lemma2_check(alpha: float, dt: float, mu: float, n: int, tol: float = 1e-12) -> LemmaReport:
    """Check nilpotency and the power / Mittag-Leffler bounds of the strictly upper triangular phi matrix.

    Violations are measured relative to ``max(1, bound)`` entrywise.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if n > 64:
        raise ValueError("lemma2_check is limited to n <= 64")
    W = lemma2_matrix(alpha, dt, mu, n)
    e = np.ones(n)
    # row r (0-based) pairs with t_{n-r}
    t = dt * np.arange(n, 0, -1)
    z = 2.0 * math.gamma(alpha) * mu * t**alpha

    nilpotent = bool(np.all(np.linalg.matrix_power(W, n) == 0.0))

    def rel_excess(v, log_bound):
        # (v - b) / max(1, b) without forming b when it overflows
        return np.where(log_bound > 0.0, v * np.exp(-np.maximum(log_bound, 0.0)) - 1.0, v - np.exp(np.minimum(log_bound, 0.0)))

    with np.errstate(divide="ignore"):
        logz = np.log(z)
    worst_power = -math.inf
    v = e.copy()
    acc = np.zeros(n)
    for k in range(n + 1):
        if k < n:
            acc += v
        log_bound = k * logz - math.lgamma(1.0 + k * alpha) if k else np.zeros(n)
        worst_power = max(worst_power, float(np.max(rel_excess(v, log_bound))))
        v = W @ v

    worst_sum = float(np.max(rel_excess(acc, log_mittag_leffler(alpha, z))))

    worst = max(worst_power, worst_sum)
    passed = nilpotent and worst <= tol
    return LemmaReport(
        passed=passed,
        max_violation=worst,
        details={"nilpotent": nilpotent, "power_violation": worst_power, "sum_violation": worst_sum},
    )


def lemma3_check(alpha: float, dt: float, history, tol: float = 1e-10) -> LemmaReport:
    """Check the quadratic-form inequality of the shifted quadrature.

    For each ``k >= 1`` evaluates ``<D e^k, (1-a/2) e^k + (a/2) e^{k-1}> - 1/2 D |e^k|^2``
    and passes iff the minimum is at least ``-tol``.
    """
    e = np.asarray(history, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    K = e.shape[0] - 1
    if K < 1:
        raise ValueError("need at least e^0 and e^1")
    w = grunwald_weights(alpha, K)
    sq = np.einsum("ij,ij->i", e, e)
    a1, a2 = 1.0 - alpha / 2.0, alpha / 2.0
    gaps = np.empty(K)
    for k in range(1, K + 1):
        De = frac_derivative_apply(w, dt, e[: k + 1])
        lhs = float(np.dot(De, a1 * e[k] + a2 * e[k - 1]))
        rhs = 0.5 * frac_derivative_apply(w, dt, sq[: k + 1])
        gaps[k - 1] = lhs - rhs
    worst = float(gaps.min())
    return LemmaReport(passed=worst >= -tol, max_violation=-worst, details={"gaps": gaps})
