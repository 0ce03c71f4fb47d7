"""Problem descriptions and manufactured-solution benchmarks.

A problem is ``D^alpha u - Laplace u = f(t, u, u(t - tau), x)`` on the unit
square or cube with zero Dirichlet data and history ``u = phi`` on
``[-tau, 0]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ProblemSpec",
    "SeparableSolution",
    "ManufacturedProblem",
    "power_law",
    "sine_product",
    "manufactured",
    "mackey_glass_2d",
    "nicholson_3d",
    "PROBLEMS",
    "get_problem",
]

Source = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
SpaceTime = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    """Data of a delayed time-fractional problem.

    ``f(t, u, u_delay, x)`` is the full right-hand side including any forcing.
    ``history(x, t)`` and ``history_grad(x, t)`` describe the solution on
    ``[-tau, 0]``; ``history_grad`` returns the spatial gradient stacked along
    the first axis.
    """

    alpha: float
    tau: float
    T: float
    dim: int
    f: Source
    history: SpaceTime
    history_grad: SpaceTime
    exact: Optional[SpaceTime] = None
    exact_grad: Optional[SpaceTime] = None
    name: str = "custom"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.tau <= 0 or self.T <= 0:
            raise ValueError("tau and T must be positive")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")


@dataclass(frozen=True)
class SeparableSolution:
    """``u(x, t) = temporal(t) * spatial(x)`` with the derivatives the builder needs.

    ``temporal_rld(t, alpha)`` is the Riemann–Liouville derivative (lower
    terminal 0) of the temporal factor, in closed form.
    """

    temporal: Callable[[float], float]
    temporal_rld: Callable[[float, float], float]
    spatial: Callable[[np.ndarray], np.ndarray]
    spatial_grad: Callable[[np.ndarray], np.ndarray]
    spatial_laplacian: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x, t):
        return self.temporal(t) * self.spatial(x)

    def grad(self, x, t):
        return self.temporal(t) * self.spatial_grad(x)


def power_law(p: int) -> tuple[Callable[[float], float], Callable[[float, float], float]]:
    """``t^p`` and its Riemann–Liouville derivative ``Gamma(p+1)/Gamma(p+1-a) t^(p-a)``."""
    if p < 0:
        raise ValueError("p must be non-negative")

    def temporal(t):
        return float(t) ** p

    def rld(t, alpha):
        if t <= 0:
            return 0.0 if p > alpha else math.inf
        return math.gamma(p + 1) / math.gamma(p + 1 - alpha) * t ** (p - alpha)

    return temporal, rld


def sine_product(dim: int):
    """``prod_i sin(pi x_i)`` with gradient and Laplacian."""

    def s(x):
        return np.prod([np.sin(np.pi * x[i]) for i in range(dim)], axis=0)

    def grad(x):
        sins = [np.sin(np.pi * x[i]) for i in range(dim)]
        comps = []
        for i in range(dim):
            c = np.pi * np.cos(np.pi * x[i])
            for j in range(dim):
                if j != i:
                    c = c * sins[j]
            comps.append(c)
        return np.stack(comps)

    def lap(x):
        return -dim * np.pi**2 * s(x)

    return s, grad, lap


@dataclass(frozen=True)
class ManufacturedProblem(ProblemSpec):
    solution: Optional[SeparableSolution] = None
    forcing: Optional[SpaceTime] = None


def manufactured(
    u: SeparableSolution,
    base_f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    *,
    alpha: float,
    tau: float,
    T: float,
    dim: int,
    name: str = "manufactured",
) -> ManufacturedProblem:
    """Problem whose exact solution is ``u`` for the reaction ``base_f(u, u_delay)``.

    The forcing is ``D^alpha u - Laplace u - base_f(u, u(t - tau))``; the
    solution itself also serves as history on ``[-tau, 0]``.
    """

    def forcing(x, t):
        s = u.spatial(x)
        now = u.temporal(t) * s
        delayed = u.temporal(t - tau) * s
        return u.temporal_rld(t, alpha) * s - u.temporal(t) * u.spatial_laplacian(x) - base_f(now, delayed)

    def f(t, uh, ud, x):
        return base_f(uh, ud) + forcing(x, t)

    return ManufacturedProblem(
        alpha=alpha,
        tau=tau,
        T=T,
        dim=dim,
        f=f,
        history=u,
        history_grad=u.grad,
        exact=u,
        exact_grad=u.grad,
        name=name,
        solution=u,
        forcing=forcing,
    )


def _mackey_glass(u, ud):
    return -2.0 * u + ud / (1.0 + ud * ud)


def _nicholson(u, ud):
    return -2.0 * u + ud * np.exp(-ud)


def mackey_glass_2d(alpha: float = 0.4) -> ManufacturedProblem:
    """Mackey–Glass-type delay reaction on the unit square, ``u = t^2 sin(pi x) sin(pi y)``."""
    temporal, rld = power_law(2)
    sol = SeparableSolution(temporal, rld, *sine_product(2))
    return manufactured(sol, _mackey_glass, alpha=alpha, tau=0.1, T=1.0, dim=2, name="mackey_glass_2d")


def nicholson_3d(alpha: float = 0.4) -> ManufacturedProblem:
    """Nicholson blowflies delay reaction on the unit cube, ``u = t^2 prod sin(pi x_i)``."""
    temporal, rld = power_law(2)
    sol = SeparableSolution(temporal, rld, *sine_product(3))
    return manufactured(sol, _nicholson, alpha=alpha, tau=0.1, T=1.0, dim=3, name="nicholson_3d")


PROBLEMS = {
    "mackey_glass_2d": mackey_glass_2d,
    "nicholson_3d": nicholson_3d,
}


def get_problem(name: str, alpha: float = 0.4) -> ManufacturedProblem:
    try:
        return PROBLEMS[name](alpha)
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
