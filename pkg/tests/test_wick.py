import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wicklab.errors import WicklabError
from wicklab.funcgrid import GridFunction, constant, sample
from wicklab.moments import exact_expectation, phi_eval
from wicklab.wick import (
    bernoulli_moments,
    gaussian_moments,
    noise_moments,
    stochastic_exponent_closed,
    stochastic_exponent_partial,
    wick_polynomial,
    wick_polynomials,
    wick_power_of_noise,
)


def coeffs(p):
    return [float(c) for c in p.coeffs]


def test_bernoulli_base_polynomials():
    ps = wick_polynomials(bernoulli_moments(4))
    assert coeffs(ps[0]) == [1.0]
    assert coeffs(ps[2]) == [-1.0, 0.0, 1.0]
    assert coeffs(ps[3]) == [0.0, -3.0, 0.0, 1.0]
    assert coeffs(ps[4]) == [5.0, 0.0, -6.0, 0.0, 1.0]


def test_gaussian_base_gives_hermite():
    ps = wick_polynomials(gaussian_moments(4))
    assert coeffs(ps[3]) == [0.0, -3.0, 0.0, 1.0]
    assert coeffs(ps[4]) == [3.0, 0.0, -6.0, 0.0, 1.0]


def test_moment_lists():
    assert bernoulli_moments(4) == [1, 0, 1, 0, 1]
    assert gaussian_moments(6) == [1, 0, 1, 0, 3, 0, 15]


def test_exact_coefficients_are_fractions():
    p = wick_polynomial(bernoulli_moments(6))
    assert all(isinstance(c, Fraction) for c in p.exact_coeffs)
    assert p.mean() == 0


def test_noise_examples():
    one = constant(1.0, 2)
    assert coeffs(wick_power_of_noise(one, 1)) == pytest.approx([0.0, 1.0])
    assert coeffs(wick_power_of_noise(one, 2)) == pytest.approx([-1.0, 0.0, 1.0])
    assert coeffs(wick_power_of_noise(one, 3)) == pytest.approx([0.0, -3.0, 0.0, 1.0])
    assert coeffs(wick_power_of_noise(one, 0)) == [1.0]


def test_noise_engines_agree():
    f = sample("sin(2*x) + 0.3", 6)
    a = noise_moments(f, 8, "formula")
    b = noise_moments(f, 8, "bruteforce")
    assert a == pytest.approx(b, rel=1e-12, abs=1e-14)
    with pytest.raises(ValueError):
        noise_moments(f, 2, "magic")


@pytest.mark.parametrize("m", range(0, 13))
def test_laws_on_bernoulli_base(m):
    ps = wick_polynomials(bernoulli_moments(12))
    p = ps[m]
    assert p.coeffs[m] == 1.0
    assert p.mean() == 0 or m == 0
    if m:
        assert np.allclose(p.derivative(), m * ps[m - 1].coeffs, atol=1e-9, rtol=0)


@pytest.mark.parametrize("m", range(1, 9))
def test_pathwise_mean_vanishes(m):
    f = sample("1 - x^2", 7)
    p = wick_power_of_noise(f, m)
    assert exact_expectation(lambda e: p(phi_eval(f, e)), 7) == pytest.approx(0.0, abs=1e-10)


def test_bad_moments():
    with pytest.raises(WicklabError):
        wick_polynomials([2, 0, 1])
    with pytest.raises(ValueError):
        wick_polynomials([])
    with pytest.raises(ValueError):
        wick_power_of_noise(constant(1.0, 2), -1)


def test_stochastic_exponent_examples():
    moments = bernoulli_moments(40)
    assert stochastic_exponent_partial(0.0, moments, 0.7, 40) == 1.0
    assert stochastic_exponent_partial(1.0, moments, 1.0, 40) == pytest.approx(math.e / math.cosh(1.0), abs=1e-8)
    assert stochastic_exponent_partial(0.5, moments, -1.0, 40) == pytest.approx(0.537883, abs=1e-6)
    assert stochastic_exponent_partial(0.5, moments, -1.0, 40) == pytest.approx(
        math.exp(-0.5) / math.cosh(0.5), abs=1e-8
    )


def test_partial_sum_error_shrinks():
    moments = bernoulli_moments(40)
    exact = math.exp(1.0) / math.cosh(1.0)
    errs = [abs(stochastic_exponent_partial(1.0, moments, 1.0, N) - exact) for N in (10, 20, 30, 40)]
    assert errs == sorted(errs, reverse=True)
    with pytest.raises(ValueError):
        stochastic_exponent_partial(1.0, moments, 1.0, 41)


def test_closed_exponent_examples():
    f = constant(1.0, 1)
    assert stochastic_exponent_closed(1.0, f, [1.0]) == pytest.approx(math.e / math.cosh(1.0))
    assert stochastic_exponent_closed(0.0, sample("x", 4), [1, -1, 1, 1]) == 1.0


@pytest.mark.parametrize("n", [1, 5, 12])
@pytest.mark.parametrize("alpha", [0.25, 1.0, 3.0])
def test_closed_exponent_has_unit_mean(n, alpha):
    f = sample("cos(3*x) + 0.2", n)
    mean = exact_expectation(lambda e: stochastic_exponent_closed(alpha, f, e), n)
    assert mean == pytest.approx(1.0, abs=1e-10)


def test_closed_exponent_matches_series_on_noise():
    # Series in :phi^m: built from the noise's own moments.
    f = sample("x", 3)
    moments = noise_moments(f, 16)
    eps = np.array([1.0, -1.0, 1.0])
    x = phi_eval(f, eps)
    series = stochastic_exponent_partial(0.3, moments, x, 16)
    assert series == pytest.approx(stochastic_exponent_closed(0.3, f, eps), abs=1e-10)


def test_closed_exponent_large_alpha_is_finite():
    # All signs aligned with f: the normalised exponent tends to 2**n.
    assert stochastic_exponent_closed(1e6, constant(1.0, 4), [1, 1, 1, 1]) == pytest.approx(16.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1.5, 1.5, allow_nan=False), min_size=1, max_size=6), st.integers(1, 10))
def test_laws_on_noise_base(vals, m):
    f = GridFunction(len(vals), 1, np.array(vals))
    ps = wick_polynomials(noise_moments(f, m))
    p = ps[m]
    scale = max(1.0, float(np.max(np.abs(p.coeffs))))
    assert p.coeffs[m] == 1.0
    assert np.max(np.abs(p.derivative() - m * ps[m - 1].coeffs)) <= 1e-9 * scale
    mus = np.array(noise_moments(f, m))
    assert abs(p.mean()) <= 1e-9 * max(1.0, float(np.sum(np.abs(p.coeffs * mus))))
