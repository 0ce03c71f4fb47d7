"""Linearized fractional Crank–Nicolson–Galerkin time stepping with a constant delay.

At step ``n`` the scheme solves

    [dt^-a M + (1 - a/2) K] U^n = F^n - (a/2) K U^{n-1} - dt^-a sum_{i<n} omega_{n-i} M U^i

where ``F^n`` is the load of ``f(t_{n-a/2}, Uhat, Udelay)`` with the two-point
extrapolation ``Uhat = (2 - a/2) U^{n-1} - (1 - a/2) U^{n-2}`` and the delayed
average ``Udelay = (1 - a/2) U^{n-m} + (a/2) U^{n-m-1}``, ``dt = tau / m``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .fem import (
    FeSpace,
    assemble_mass,
    assemble_stiffness,
    l2_error,
    load_from_values,
    ritz_project,
    spd_solve,
)
from .fracquad import FractionalWeights, grunwald_weights
from .problems import ProblemSpec
from .quadrature import simplex_rule

__all__ = [
    "SchemeCoefficients",
    "StateHistory",
    "Scheme",
    "RunResult",
    "init_history",
    "step",
    "run",
    "num_steps",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchemeCoefficients:
    alpha: float

    @property
    def a1(self) -> float:
        return 1.0 - self.alpha / 2.0

    @property
    def a2(self) -> float:
        return self.alpha / 2.0

    @property
    def b1(self) -> float:
        return 2.0 - self.alpha / 2.0

    @property
    def b2(self) -> float:
        return 1.0 - self.alpha / 2.0

    def eval_time(self, n: int, dt: float) -> float:
        return (n - self.alpha / 2.0) * dt


@dataclass
class StateHistory:
    """All coefficient vectors ``U^{-m}..U^n`` plus cached ``M U^i`` for ``i >= 0``."""

    m_tau: int
    states: list = field(default_factory=list)
    mass_products: list = field(default_factory=list)
    mass_product_count: int = 0

    @property
    def last(self) -> int:
        """Index of the newest stored state."""
        return len(self.states) - 1 - self.m_tau

    def __getitem__(self, k: int) -> np.ndarray:
        if k < -self.m_tau or k > self.last:
            raise IndexError(f"state U^{k} not available (have {-self.m_tau}..{self.last})")
        return self.states[k + self.m_tau]

    def append(self, U: np.ndarray, mass: sp.spmatrix) -> None:
        self.states.append(U)
        if self.last >= 0:
            self.mass_products.append(mass @ U)
            self.mass_product_count += 1


def num_steps(T: float, dt: float) -> int:
    n = round(T / dt)
    if abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return int(n)


def init_history(
    problem: ProblemSpec,
    space: FeSpace,
    m_tau: int,
    stiffness: Optional[sp.spmatrix] = None,
    mass: Optional[sp.spmatrix] = None,
    rel_tol: float = 1e-12,
) -> StateHistory:
    """Ritz projections of the history at ``t_j = j dt``, ``j = -m..0``."""
    if m_tau < 1:
        raise ValueError("m_tau must be a positive integer")
    if stiffness is None:
        stiffness = assemble_stiffness(space)
    if mass is None:
        mass = assemble_mass(space)
    dt = problem.tau / m_tau
    hist = StateHistory(m_tau=m_tau)
    for j in range(-m_tau, 1):
        t = j * dt
        U = ritz_project(space, stiffness, lambda x, t=t: problem.history_grad(x, t), rel_tol)
        hist.append(U, mass)
    return hist


class Scheme:
    """Matrices, weights and quadrature data shared by every step of one run."""

    def __init__(
        self,
        problem: ProblemSpec,
        space: FeSpace,
        m_tau: int,
        mass: Optional[sp.spmatrix] = None,
        stiffness: Optional[sp.spmatrix] = None,
        weights: Optional[FractionalWeights] = None,
        rel_tol: float = 1e-12,
        convolution: str = "weights",
    ):
        if convolution not in ("weights", "difference"):
            raise ValueError("convolution must be 'weights' or 'difference'")
        self.problem = problem
        self.space = space
        self.m_tau = m_tau
        self.dt = problem.tau / m_tau
        self.N = num_steps(problem.T, self.dt)
        self.coef = SchemeCoefficients(problem.alpha)
        self.mass = assemble_mass(space) if mass is None else mass
        self.stiffness = assemble_stiffness(space) if stiffness is None else stiffness
        if weights is None:
            weights = grunwald_weights(problem.alpha, self.N)
        if weights.alpha != problem.alpha:
            raise ValueError("weights were built for a different alpha")
        self.weights = weights
        self.rel_tol = rel_tol
        self.convolution = convolution
        self.scale = self.dt ** (-problem.alpha)
        self.system = (self.scale * weights.omega[0] * self.mass + self.coef.a1 * self.stiffness).tocsr()
        self.rule_degree = 2 * space.degree + 1
        self.tail_terms = 0
        self._xq = None

    def quadrature_points(self) -> np.ndarray:
        if self._xq is None:
            rule = simplex_rule(self.space.dim, self.rule_degree)
            x0, J, _, _ = self.space.geometry
            xq = x0[:, None, :] + np.einsum("cij,qj->cqi", J, rule.points)
            self._xq = np.moveaxis(xq, -1, 0)
        return self._xq

    def init_history(self) -> StateHistory:
        return init_history(self.problem, self.space, self.m_tau, self.stiffness, self.mass, self.rel_tol)

    def extrapolated_state(self, n: int, hist: StateHistory) -> np.ndarray:
        """``(2 - a/2) U^{n-1} - (1 - a/2) U^{n-2}``."""
        return self.coef.b1 * hist[n - 1] - self.coef.b2 * hist[n - 2]

    def delayed_state(self, n: int, hist: StateHistory) -> np.ndarray:
        """``(1 - a/2) U^{n-m} + (a/2) U^{n-m-1}``, the delay tap at ``t_{n-a/2} - tau``."""
        m = self.m_tau
        return self.coef.a1 * hist[n - m] + self.coef.a2 * hist[n - m - 1]

    def load(self, n: int, hist: StateHistory) -> np.ndarray:
        c = self.coef
        space = self.space
        u_hat = self.extrapolated_state(n, hist)
        u_del = self.delayed_state(n, hist)
        uq = space.values_at_quadrature(space.extend(u_hat), self.rule_degree)
        dq = space.values_at_quadrature(space.extend(u_del), self.rule_degree)
        t = c.eval_time(n, self.dt)
        vals = np.asarray(self.problem.f(t, uq, dq, self.quadrature_points()), dtype=float)
        return load_from_values(space, np.broadcast_to(vals, uq.shape), self.rule_degree)

    def memory_term(self, n: int, hist: StateHistory) -> np.ndarray:
        """Known part of ``dt^a`` times the discrete derivative at step ``n`` (mass-weighted)."""
        mp = hist.mass_products
        if self.convolution == "weights":
            w = self.weights.omega
            acc = w[n] * mp[0]
            for i in range(1, n):
                acc = acc + w[n - i] * mp[i]
            self.tail_terms += n
            return acc
        g = self.weights.g
        acc = g[n] * mp[0] - g[0] * mp[n - 1]
        for i in range(1, n):
            acc = acc + g[n - i] * (mp[i] - mp[i - 1])
        self.tail_terms += n
        return acc

    def step(self, n: int, hist: StateHistory, extra_rhs: Optional[np.ndarray] = None) -> np.ndarray:
        """Advance to ``U^n``, append it to ``hist`` and return it."""
        if n < 1:
            raise ValueError("steps start at n = 1")
        if hist.last != n - 1:
            raise IndexError(f"history ends at U^{hist.last}, cannot compute U^{n}")
        if n > self.weights.n:
            raise ValueError(f"weights only reach index {self.weights.n}")
        rhs = self.load(n, hist)
        rhs -= self.coef.a2 * (self.stiffness @ hist[n - 1])
        rhs -= self.scale * self.memory_term(n, hist)
        if extra_rhs is not None:
            rhs = rhs + extra_rhs
        U = spd_solve(self.system, rhs, self.rel_tol, x0=hist[n - 1])
        hist.append(U, self.mass)
        return U


def step(
    n: int,
    hist: StateHistory,
    mass: sp.spmatrix,
    stiffness: sp.spmatrix,
    problem: ProblemSpec,
    dt: float,
    space: FeSpace,
    weights: Optional[FractionalWeights] = None,
) -> np.ndarray:
    """One step of the scheme; builds a throwaway :class:`Scheme`."""
    m_tau = round(problem.tau / dt)
    if abs(m_tau * dt - problem.tau) > 1e-12 * problem.tau:
        raise ValueError("dt must divide tau")
    if weights is None:
        weights = grunwald_weights(problem.alpha, n)
    scheme = Scheme(problem, space, m_tau, mass=mass, stiffness=stiffness, weights=weights)
    return scheme.step(n, hist)


@dataclass
class RunResult:
    U: np.ndarray
    error: Optional[float]
    max_error: Optional[float]
    steps: int
    dt: float
    seconds: float
    history: StateHistory = field(repr=False)


def run(
    problem: ProblemSpec,
    space: FeSpace,
    m_tau: int,
    rel_tol: float = 1e-12,
    track_max_error: bool = False,
    scheme: Optional[Scheme] = None,
) -> RunResult:
    """Solve up to ``T``; report the L2 error at ``T`` when the exact solution is known."""
    t0 = time.perf_counter()
    if scheme is None:
        scheme = Scheme(problem, space, m_tau, rel_tol=rel_tol)
    hist = scheme.init_history()
    exact = problem.exact
    max_err = None
    for n in range(1, scheme.N + 1):
        U = scheme.step(n, hist)
        if track_max_error and exact is not None:
            t = n * scheme.dt
            e = l2_error(space, U, lambda x, t=t: exact(x, t))
            max_err = e if max_err is None else max(max_err, e)
    U = hist[scheme.N]
    err = None
    if exact is not None:
        err = l2_error(space, U, lambda x: exact(x, problem.T))
    seconds = time.perf_counter() - t0
    log.info(
        "%s: degree=%d divisions=%d m_tau=%d N=%d error=%s max_error=%s (%.1fs)",
        problem.name, space.degree, space.mesh.divisions, m_tau, scheme.N, err, max_err, seconds,
    )
    return RunResult(U=U, error=err, max_error=max_err, steps=scheme.N, dt=scheme.dt, seconds=seconds, history=hist)
