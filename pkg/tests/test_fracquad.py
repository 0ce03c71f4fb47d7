import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdelay.fracquad import (
    frac_derivative_apply,
    frac_derivative_difference_form,
    grunwald_weights,
    log_mittag_leffler,
    mittag_leffler,
    phi_sequence,
)

ALPHAS = [round(0.1 * k, 1) for k in range(1, 10)]


def closed_form_weight(alpha, i):
    mpmath.mp.dps = 40
    return (-1) ** i * mpmath.gamma(alpha + 1) / (mpmath.gamma(i + 1) * mpmath.gamma(alpha - i + 1))


def test_weight_examples():
    w = grunwald_weights(0.5, 2)
    assert w.omega[0] == 1.0
    assert w.omega[1] == -0.5
    assert w.omega[2] == pytest.approx(float(closed_form_weight(0.5, 2)), rel=1e-15)
    assert w.omega[2] == pytest.approx(-0.125, rel=1e-15)


@pytest.mark.parametrize("alpha", [0.1, 0.37, 0.5, 0.9])
def test_recursion_matches_closed_form(alpha):
    w = grunwald_weights(alpha, 200)
    ref = np.array([float(closed_form_weight(alpha, i)) for i in range(201)])
    np.testing.assert_allclose(w.omega, ref, rtol=1e-13, atol=0)
    np.testing.assert_allclose(w.g, np.cumsum(ref), rtol=1e-12)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_weight_monotonicity(alpha):
    w = grunwald_weights(alpha, 2000)
    om = w.omega[1:]
    assert np.all(om > -1) and np.all(om < 0)
    assert np.all(np.diff(om) > 0)
    assert w.g[0] == 1.0
    assert np.all(w.g > 0) and np.all(np.diff(w.g) < 0)


def test_weights_are_read_only():
    w = grunwald_weights(0.5, 4)
    with pytest.raises(ValueError):
        w.omega[0] = 2.0


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
def test_alpha_out_of_range(alpha):
    with pytest.raises(ValueError):
        grunwald_weights(alpha, 3)


def test_phi_examples():
    phi = phi_sequence(0.5, 1).phi
    assert phi[0] == 1.0
    assert phi[1] == pytest.approx(0.5, rel=1e-15)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_phi_bounds(alpha):
    phi = phi_sequence(alpha, 500).phi
    assert phi[0] == 1.0
    assert np.all((phi[1:] > 0) & (phi[1:] < 1))


@pytest.mark.parametrize("alpha", [0.15, 0.5, 0.85])
def test_partial_sum_identity(alpha):
    n_max = 200
    w = grunwald_weights(alpha, n_max)
    phi = phi_sequence(alpha, n_max, w).phi
    g = w.g
    worst = 0.0
    for n in range(1, n_max + 1):
        for j in range(1, n + 1):
            s = np.dot(phi[n - np.arange(j, n + 1)], g[np.arange(j, n + 1) - j])
            worst = max(worst, abs(s - 1.0))
    assert worst < 1e-12


def test_partial_sum_identity_example():
    for alpha in (0.3, 0.7):
        w = grunwald_weights(alpha, 20)
        phi = phi_sequence(alpha, 20, w).phi
        i = np.arange(1, 21)
        assert np.dot(phi[20 - i], w.g[i - 1]) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_phi_sum_bound(alpha):
    phi = phi_sequence(alpha, 2000).phi
    n = np.arange(1, 2001)
    lhs = np.cumsum(phi[:2000]) / math.gamma(alpha)
    rhs = n**alpha / math.gamma(1 + alpha)
    assert np.all(lhs <= rhs * (1 + 1e-12))


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_phi_weighted_sum_bound(alpha, k):
    phi = phi_sequence(alpha, 500).phi
    c = 1.0 / (math.gamma(alpha) * math.gamma(1 + (k - 1) * alpha))
    for n in range(2, 501):
        i = np.arange(1, n)
        lhs = c * np.dot(phi[n - i], i ** ((k - 1) * alpha))
        assert lhs <= n ** (k * alpha) / math.gamma(1 + alpha) * (1 + 1e-12)


def test_mittag_leffler_examples():
    assert mittag_leffler(0.7, 0.0) == 1.0
    assert mittag_leffler(1.0, 1.0) == pytest.approx(math.e, rel=1e-14)
    # independent closed form: E_{1/2}(z) = exp(z^2) erfc(-z)
    ref = math.exp(1.0) * math.erfc(-1.0)
    assert mittag_leffler(0.5, 1.0) == pytest.approx(ref, rel=1e-13)
    assert ref == pytest.approx(5.0089801, abs=1e-7)


@pytest.mark.parametrize("z", [0.3, 2.0, 5.0, 10.0])
def test_mittag_leffler_half_closed_form(z):
    ref = float(mpmath.exp(z * z) * mpmath.erfc(-z))
    assert mittag_leffler(0.5, z) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("z", [0.0, 0.5, 3.0, 6.0])
def test_log_mittag_leffler_matches_series(alpha, z):
    assert log_mittag_leffler(alpha, z) == pytest.approx(math.log(mittag_leffler(alpha, z)), abs=1e-12)


def mp_log_mittag_leffler(alpha, z):
    mpmath.mp.dps = 50
    terms = int(3 * z ** (1 / alpha) / alpha) + 50
    total = mpmath.fsum(mpmath.power(z, k) * mpmath.rgamma(1 + k * alpha) for k in range(terms))
    return float(mpmath.log(total))


@pytest.mark.parametrize("alpha,z", [(0.3, 10.0), (0.5, 40.0), (0.7, 150.0)])
def test_log_mittag_leffler_past_overflow(alpha, z):
    with pytest.raises(OverflowError):
        mittag_leffler(alpha, z)
    assert log_mittag_leffler(alpha, z) == pytest.approx(mp_log_mittag_leffler(alpha, z), rel=1e-12)


def test_mittag_leffler_rejects_negative_argument():
    with pytest.raises(ValueError):
        mittag_leffler(0.5, -1.0)


def test_log_mittag_leffler_large_argument():
    # E_{1/2}(z) ~ exp(z^2) erfc(-z) ~ 2 exp(z^2)
    z = 60.0
    assert log_mittag_leffler(0.5, z) == pytest.approx(z * z + math.log(2.0), rel=1e-12)
    with pytest.raises(OverflowError):
        mittag_leffler(0.5, z)
    # beyond the term cap only the leading exponential matters
    z = 20.0
    assert log_mittag_leffler(0.3, z) == pytest.approx(z ** (1 / 0.3) - math.log(0.3), rel=1e-14)


def test_constant_history():
    alpha, dt, c = 0.4, 0.05, 3.0
    w = grunwald_weights(alpha, 30)
    for n in (0, 1, 7, 30):
        got = frac_derivative_apply(w, dt, np.full(n + 1, c))
        assert got == pytest.approx(dt**-alpha * w.g[n] * c, rel=1e-13)


@settings(max_examples=50, deadline=None)
@given(
    alpha=st.floats(0.05, 0.95),
    n=st.integers(0, 60),
    dt=st.floats(1e-3, 1.0),
    seed=st.integers(0, 2**31),
)
def test_difference_form_equals_weight_form(alpha, n, dt, seed):
    w = grunwald_weights(alpha, n)
    u = np.random.default_rng(seed).normal(size=(n + 1, 3))
    a = frac_derivative_apply(w, dt, u)
    b = frac_derivative_difference_form(w, dt, u)
    scale = dt**-alpha * np.abs(u).max()
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12 * scale)


def test_history_length_mismatch():
    w = grunwald_weights(0.5, 3)
    with pytest.raises(ValueError):
        frac_derivative_apply(w, 0.1, np.zeros(5))


def rld_t2_errors(alpha, T=1.0, levels=(10, 20, 40, 80, 160)):
    exact = lambda t: 2 * t ** (2 - alpha) / math.gamma(3 - alpha)
    errs = []
    for N in levels:
        dt = T / N
        w = grunwald_weights(alpha, N)
        u = (dt * np.arange(N + 1)) ** 2
        errs.append(abs(frac_derivative_apply(w, dt, u) - exact((N - alpha / 2) * dt)))
    return np.array(errs)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_second_order_consistency(alpha):
    errs = rld_t2_errors(alpha)
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all(orders >= 1.9)
