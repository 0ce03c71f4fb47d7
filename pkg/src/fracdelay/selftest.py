"""Quick in-process property suites behind ``fracdelay selftest``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fem import assemble_mass, assemble_stiffness, build_space, reference_basis
from .fracquad import grunwald_weights, phi_sequence
from .gronwall import GronwallParams, domination_ratio, lemma2_check, lemma3_check
from .quadrature import simplex_rule


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def weights_suite(n: int = 2000) -> SuiteResult:
    worst = ""
    for alpha in np.round(np.arange(0.1, 1.0, 0.1), 1):
        w = grunwald_weights(float(alpha), n)
        om, g = w.omega, w.g
        ok = om[0] == 1.0 and np.all(om[1:] > -1) and np.all(np.diff(om[1:]) > 0) and np.all(om[1:] < 0)
        ok = ok and g[0] == 1.0 and np.all(np.diff(g) < 0) and np.all(g > 0)
        if not ok:
            worst = f"alpha={alpha}"
            break
    return SuiteResult("weights monotonicity", not worst, worst or f"alpha in 0.1..0.9, n={n}")


def phi_suite(n: int = 500) -> SuiteResult:
    worst = 0.0
    for alpha in (0.2, 0.5, 0.8):
        w = grunwald_weights(alpha, n)
        phi = phi_sequence(alpha, n, w).phi
        g = w.g
        for N in range(1, n + 1):
            # sum_{i=j}^{N} phi_{N-i} g_{i-j} for all j at once
            conv = np.convolve(phi[: N + 1], g[: N + 1])[N]
            worst = max(worst, abs(conv - 1.0))
            ii = phi[:N].sum() / math.gamma(alpha) - N**alpha / math.gamma(1 + alpha)
            if ii > 1e-12 or not (0 < phi[N] < 1):
                return SuiteResult("phi identities", False, f"alpha={alpha} n={N}")
    return SuiteResult("phi identities", worst < 1e-12, f"max identity defect {worst:.2e}")


def matrix_suite() -> SuiteResult:
    worst = -math.inf
    for alpha in (0.3, 0.5, 0.7):
        for n in (2, 8, 16, 32):
            for dt, mu in ((0.1, 1.0), (0.01, 5.0)):
                rep = lemma2_check(alpha, dt, mu, n)
                worst = max(worst, rep.max_violation)
                if not rep:
                    return SuiteResult("matrix power bounds", False, f"alpha={alpha} n={n} dt={dt} mu={mu}")
    return SuiteResult("matrix power bounds", True, f"max relative excess {worst:.2e}")


def quadratic_form_suite(trials: int = 50, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        alpha = float(rng.uniform(0.05, 0.95))
        rep = lemma3_check(alpha, 0.1, rng.normal(size=(31, 10)))
        worst = max(worst, rep.max_violation)
        if not rep:
            return SuiteResult("quadratic form", False, f"violation {rep.max_violation:.2e} at alpha={alpha}")
    return SuiteResult("quadratic form", True, f"{trials} random sequences")


def gronwall_suite(trials: int = 50, n: int = 200, seed: int = 1) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        alpha = float(rng.choice([0.3, 0.5, 0.7]))
        m = int(rng.choice([1, 2, 5]))
        lams = tuple(rng.uniform(0, 2, 5))
        dt = GronwallParams(alpha, 1.0, lams, m).dt_star / 2 * float(rng.uniform(0.01, 1.0))
        p = GronwallParams(alpha, dt, lams, m)
        worst = max(worst, domination_ratio(p, rng.uniform(0, 1, m + 1), rng.uniform(0, 1, n)))
    return SuiteResult("gronwall domination", worst <= 1 + 1e-9, f"max ratio {worst:.3e}")


def fem_suite() -> SuiteResult:
    for dim in (2, 3):
        for degree in (1, 2):
            rule = simplex_rule(dim, 2 * degree + 1)
            phi, _ = reference_basis(degree, dim, rule.points)
            if np.max(np.abs(phi.sum(axis=0) - 1.0)) > 1e-13:
                return SuiteResult("fem", False, f"partition of unity dim={dim} P{degree}")
            space = build_space((dim, 2), degree)
            M = assemble_mass(space, full=True)
            K = assemble_stiffness(space, full=True)
            if abs(M.sum() - 1.0) > 1e-12 or np.max(np.abs(K @ np.ones(space.num_dofs))) > 1e-12:
                return SuiteResult("fem", False, f"mass/stiffness sums dim={dim} P{degree}")
    return SuiteResult("fem", True, "partition of unity, mass total, stiffness kernel")


SUITES = (weights_suite, phi_suite, matrix_suite, quadratic_form_suite, gronwall_suite, fem_suite)


def run_all() -> list[SuiteResult]:
    return [suite() for suite in SUITES]
