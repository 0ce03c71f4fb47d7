import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdelay.fracquad import grunwald_weights, mittag_leffler, phi_sequence
from fracdelay.gronwall import (
    GronwallParams,
    StepRestrictionError,
    bound_sequence,
    domination_ratio,
    gronwall_bound,
    lemma2_check,
    lemma2_matrix,
    lemma3_check,
    log_gronwall_bound,
    recursion_oracle,
)


def test_bound_trivial():
    p = GronwallParams(0.5, 0.1, (0, 0, 0, 0, 0), 2, M_init=1.0, f_max=0.0)
    for n in (1, 5, 50):
        assert gronwall_bound(p, n) == pytest.approx(4.0, rel=1e-15)


def test_bound_collapses_with_only_lambda1():
    alpha, dt, l1, M = 0.6, 0.05, 1.3, 2.5
    p = GronwallParams(alpha, dt, (l1, 0, 0, 0, 0), 3, M_init=M)
    for n in (1, 7, 20):
        z = 2 * math.gamma(alpha) * l1 * (n * dt) ** alpha
        assert gronwall_bound(p, n) == pytest.approx(4 * M * mittag_leffler(alpha, z), rel=1e-14)


def test_aggregated_lambda():
    p = GronwallParams(0.4, 0.1, (1.0, 0.2, 0.3, 0.4, 0.5), 3)
    g = grunwald_weights(0.4, 4).g
    ref = 1.0 + 0.2 / (g[0] - g[1]) + 0.3 / (g[1] - g[2]) + 0.4 / (g[2] - g[3]) + 0.5 / (g[3] - g[4])
    assert p.lam == pytest.approx(ref, rel=1e-15)
    assert p.lam >= 1.0
    assert p.dt_star == pytest.approx((1 / 2.0) ** (1 / 0.4))


def test_step_restriction():
    p = GronwallParams(0.5, 1.0, (1.0, 0, 0, 0, 0), 1, M_init=1.0)
    assert p.dt > p.dt_star
    with pytest.raises(StepRestrictionError):
        gronwall_bound(p, 3)
    assert GronwallParams(0.5, 10.0, (0, 1, 1, 1, 1), 1).dt_star == math.inf


def test_oracle_homogeneous_zero():
    p = GronwallParams(0.5, 0.1, (0, 0, 0, 0, 0), 2)
    np.testing.assert_array_equal(recursion_oracle(p, np.zeros(3), np.zeros(30)), 0.0)


def test_oracle_homogeneous_constant_decays():
    alpha, c = 0.5, 2.0
    p = GronwallParams(alpha, 0.1, (0, 0, 0, 0, 0), 2)
    u = recursion_oracle(p, np.full(3, c), np.zeros(100))
    assert np.all(u > 0)
    assert np.all(np.diff(u) < 0)
    assert u[0] < c
    # explicit form of the homogeneous recursion
    w = grunwald_weights(alpha, 100).omega
    full = np.concatenate([[c], u])
    for j in (1, 10, 100):
        assert full[j] == pytest.approx(-np.dot(w[j:0:-1], full[:j]), rel=1e-12)


def test_oracle_log_mode_agrees():
    p = GronwallParams(0.5, 0.05, (1.0, 0.5, 0.5, 0.5, 0.5), 2)
    rng = np.random.default_rng(3)
    init, f = rng.uniform(0, 1, 3), rng.uniform(0, 1, 80)
    plain = recursion_oracle(p, init, f)
    logged = recursion_oracle(p, init, f, log=True)
    np.testing.assert_allclose(np.exp(logged), plain, rtol=1e-12)


def test_oracle_rejects_unsolvable_step():
    p = GronwallParams(0.5, 4.0, (1.0, 0, 0, 0, 0), 1)
    with pytest.raises(StepRestrictionError):
        recursion_oracle(p, np.ones(2), np.ones(3))


def test_oracle_rejects_negative_data():
    p = GronwallParams(0.5, 0.1, (0, 0, 0, 0, 0), 1)
    with pytest.raises(ValueError):
        recursion_oracle(p, [-1.0, 0.0], [0.0])


def sample_params(rng):
    alpha = float(rng.choice([0.3, 0.5, 0.7]))
    m = int(rng.choice([1, 2, 5]))
    lams = tuple(rng.uniform(0, 2, 5))
    star = GronwallParams(alpha, 1.0, lams, m).dt_star
    dt = min(star, 1.0) / 2 * float(rng.uniform(0.05, 1.0))
    return GronwallParams(alpha, dt, lams, m)


def test_bound_dominates_random_sample():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(60):
        p = sample_params(rng)
        worst = max(worst, domination_ratio(p, rng.uniform(0, 1, p.m + 1), rng.uniform(0, 1, 200)))
    assert worst <= 1 + 1e-9


def test_domination_ratio_direct_for_small_case():
    p = GronwallParams(0.5, 0.01, (0.5, 0.2, 0.2, 0.2, 0.2), 2)
    init, f = np.array([0.3, 0.7, 0.1]), np.full(50, 0.4)
    u = recursion_oracle(p, init, f)
    b = bound_sequence(p, init, f)
    assert np.all(u <= b)
    assert domination_ratio(p, init, f) == pytest.approx(np.max(u / b), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(
    alpha=st.sampled_from([0.3, 0.5, 0.7]),
    lams=st.tuples(*[st.floats(0.01, 2.0)] * 5),
    m=st.sampled_from([1, 2, 5]),
    M=st.floats(0.01, 10.0),
    fmax=st.floats(0.01, 10.0),
)
def test_bound_monotone(alpha, lams, m, M, fmax):
    p = GronwallParams(alpha, 1.0, lams, m)
    p = GronwallParams(alpha, min(p.dt_star, 1.0) / 2, lams, m, M, fmax)
    b = [log_gronwall_bound(p, n) for n in (1, 2, 10, 40)]
    assert all(x < y for x, y in zip(b, b[1:]))
    assert log_gronwall_bound(p.with_data(M * 1.5, fmax), 10) > b[2]
    assert log_gronwall_bound(p.with_data(M, fmax * 1.5), 10) > b[2]


def test_lemma2_examples():
    rep = lemma2_check(0.5, 0.1, 1.0, 8)
    assert rep and rep.max_violation <= 0.0
    W = lemma2_matrix(0.5, 0.1, 1.0, 2)
    phi1 = phi_sequence(0.5, 1).phi[1]
    np.testing.assert_allclose(W, [[0.0, 2 * 0.1**0.5 * phi1], [0.0, 0.0]], rtol=1e-15)
    np.testing.assert_array_equal(W @ W, 0.0)
    # k = 0: identity power against the all-ones bound
    np.testing.assert_array_equal(np.linalg.matrix_power(W, 0) @ np.ones(2), np.ones(2))


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9])
@pytest.mark.parametrize("n", [2, 5, 16, 32])
def test_lemma2_sampled(alpha, n):
    for dt in (0.01, 0.1, 0.5):
        for mu in (0.1, 1.0, 5.0):
            assert lemma2_check(alpha, dt, mu, n), (dt, mu)


def test_lemma3_examples():
    assert lemma3_check(0.5, 0.1, np.zeros((6, 4)))
    alpha, dt, c = 0.4, 0.1, np.array([1.0, -2.0, 0.5])
    K = 7
    rep = lemma3_check(alpha, dt, np.tile(c, (K + 1, 1)))
    g = grunwald_weights(alpha, K).g
    sq = c @ c
    expected = dt**-alpha * g[1:] * sq - 0.5 * dt**-alpha * g[1:] * sq
    np.testing.assert_allclose(rep.details["gaps"], expected, rtol=1e-12)
    assert rep


def test_lemma3_random_sequences():
    rng = np.random.default_rng(5)
    for _ in range(50):
        alpha = float(rng.uniform(0.05, 0.95))
        dt = float(rng.uniform(0.01, 1.0))
        assert lemma3_check(alpha, dt, rng.normal(size=(51, 10)))
