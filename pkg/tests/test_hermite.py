import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wicklab.funcgrid import GridFunction, constant, sample
from wicklab.hermite import (
    KForm,
    MultiIndexCoeffs,
    clt_ks_distance,
    cosine_basis,
    hermite_functional_moment,
    hermite_polynomial,
    joint_cf_distance,
    kform_eval,
    kform_limit_check,
    kform_orthogonality_check,
    kform_second_moment_exact,
)
from wicklab.moments import McConfig, all_sign_vectors, exact_expectation, phi_eval
from wicklab.wick import gaussian_moments, wick_polynomial


def loop_kform(f, eps):
    n, k = f.n, f.arity
    total = 0.0
    for idx in permutations(range(n), k):
        total += f.values[idx] * np.prod([eps[i] for i in idx])
    return total / n ** (k / 2)


def test_kform_examples():
    assert kform_eval(KForm(f=constant(1.0, 2)), [1, -1]) == 0.0
    assert kform_eval(KForm(f=constant(1.0, 2, arity=2)), [1, 1]) == pytest.approx(1.0)
    assert kform_eval(KForm(f=constant(1.0, 2, arity=2)), [1, -1]) == pytest.approx(-1.0)


def test_kform_one_is_phi():
    f = sample("sin(x)", 5)
    eps = all_sign_vectors(5)
    assert np.array_equal(kform_eval(KForm(f=f), eps), phi_eval(f, eps))


@pytest.mark.parametrize("k", [2, 3, 4])
def test_kform_matches_loop(k):
    rng = np.random.default_rng(k)
    n = 5
    f = GridFunction(n, k, rng.normal(size=(n,) * k))
    for eps in all_sign_vectors(n)[::5]:
        assert kform_eval(KForm(f=f), eps) == pytest.approx(loop_kform(f, eps), abs=1e-12)


def test_product_and_direct_agree():
    coeffs = MultiIndexCoeffs(3, cosine_basis(3), {(1, 2, 3): 0.7, (2, 2, 1): -1.1, (3, 3, 3): 0.4})
    form = KForm(coeffs=coeffs, n=6)
    eps = all_sign_vectors(6)
    direct = kform_eval(form, eps, method="direct")
    assert kform_eval(form, eps, method="product") == pytest.approx(direct, abs=1e-12)
    with pytest.raises(ValueError):
        kform_eval(form, eps, method="magic")


def test_k_above_n_warns_and_vanishes():
    form = KForm(f=constant(1.0, 2, arity=3))
    with pytest.warns(UserWarning):
        assert kform_eval(form, [1, 1]) == 0.0


@pytest.mark.parametrize("k, m", [(1, 2), (2, 3), (1, 3), (2, 4)])
def test_orthogonality(k, m):
    rng = np.random.default_rng(10 * k + m)
    n = 6
    fk = KForm(f=GridFunction(n, k, rng.normal(size=(n,) * k)))
    fm = KForm(f=GridFunction(n, m, rng.normal(size=(n,) * m)))
    assert abs(kform_orthogonality_check(fk, fm)) <= 1e-12


def test_first_order_norm():
    one = KForm(f=constant(1.0, 4))
    assert kform_orthogonality_check(one, one) == pytest.approx(1.0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_second_moment_exact(k):
    rng = np.random.default_rng(k)
    form = KForm(f=GridFunction(6, k, rng.normal(size=(6,) * k)))
    brute = exact_expectation(lambda e: kform_eval(form, e) ** 2, 6)
    assert kform_second_moment_exact(form) == pytest.approx(brute, rel=1e-12)


def test_second_moment_closed_form_for_product():
    # Kernel a (x) b: sum over i != j of a_i^2 b_j^2 + a_i b_i a_j b_j.
    coeffs = MultiIndexCoeffs.product(cosine_basis(2), [1, 2])
    n = 16
    value = kform_second_moment_exact(KForm(coeffs=coeffs, n=n))
    g = [b.values for b in coeffs.basis_grids(n)]
    diag = np.sum(g[0] ** 2 * g[1] ** 2) / n**2
    off = (np.sum(g[0] * g[1]) / n) ** 2 - np.sum((g[0] * g[1]) ** 2) / n**2
    full = (np.sum(g[0] ** 2) / n) * (np.sum(g[1] ** 2) / n)
    assert value == pytest.approx(full - diag + off, rel=1e-12)


def test_hermite_polynomial_values():
    assert hermite_polynomial(0).tolist() == [1.0]
    assert hermite_polynomial(2).tolist() == [-1.0, 0.0, 1.0]
    assert hermite_polynomial(3).tolist() == [0.0, -3.0, 0.0, 1.0]
    with pytest.raises(ValueError):
        hermite_polynomial(-1)


@pytest.mark.parametrize("r", range(0, 9))
def test_hermite_matches_gaussian_wick(r):
    assert np.allclose(hermite_polynomial(r), wick_polynomial(gaussian_moments(r)).coeffs)


def test_functional_moments():
    basis = cosine_basis(3)
    eye = np.eye(3)
    f = MultiIndexCoeffs.product(basis, [2, 3])
    assert hermite_functional_moment([(f, 1)], eye) == 0.0
    assert hermite_functional_moment([(f, 2)], eye) == pytest.approx(1.0)
    psi = MultiIndexCoeffs.product(basis, [2])
    assert hermite_functional_moment([(psi, 2)], eye) == pytest.approx(1.0)
    assert hermite_functional_moment([(f, 2)]) == pytest.approx(1.0, abs=1e-9)


def test_functional_repeated_index_is_hermite():
    # (psi, xi)^2 with one repeated index becomes He_2; E He_2^2 = 2.
    basis = cosine_basis(2)
    f = MultiIndexCoeffs.product(basis, [2, 2])
    assert hermite_functional_moment([(f, 2)], np.eye(2)) == pytest.approx(2.0)
    f3 = MultiIndexCoeffs.product(basis, [1, 1, 1])
    assert hermite_functional_moment([(f3, 2)], np.eye(2)) == pytest.approx(6.0)


def test_coeff_validation():
    with pytest.raises(ValueError):
        MultiIndexCoeffs(2, cosine_basis(2), {(1, 3): 1.0})
    with pytest.raises(ValueError):
        MultiIndexCoeffs(1, ["x", "x"], {(1,): 1.0})
    with pytest.raises(ValueError):
        KForm()


def test_limit_check_gap_halves():
    coeffs = MultiIndexCoeffs.product(cosine_basis(3), [2, 3])
    rows = kform_limit_check(coeffs, [16, 32, 64, 128, 256], McConfig(20_000, 5), gram=np.eye(3))
    gaps = [r["second_gap"] for r in rows]
    for a, b in zip(gaps, gaps[1:]):
        assert 1.5 <= a / b <= 2.5
    assert rows[-1]["second_limit"] == pytest.approx(1.0)
    assert abs(rows[-1]["third"] - rows[-1]["third_limit"]) <= 4 * rows[-1]["third_se"]


def test_limit_check_small_n_is_exact():
    coeffs = MultiIndexCoeffs.product(cosine_basis(3), [2, 3])
    (row,) = kform_limit_check(coeffs, [8], McConfig(10, 1), gram=np.eye(3))
    assert row["mean_se"] == 0.0 and row["third_se"] == 0.0
    assert row["mean"] == pytest.approx(0.0, abs=1e-14)


def test_clt_distance_small():
    assert clt_ks_distance(sample("exp(x)", 500), McConfig(20_000, 2)) < 0.02


def test_joint_cf_distance_at_full_size():
    d = joint_cf_distance(sample("sin(3*x)", 2000), sample("x^2", 2000), McConfig(100_000, 6))
    assert d < 0.02


def test_joint_cf_distance_small():
    d = joint_cf_distance(sample("sin(3*x)", 500), sample("x", 500), McConfig(20_000, 2))
    assert d < 0.05


@settings(max_examples=25, deadline=None)
@given(
    st.integers(2, 7),
    st.lists(st.tuples(st.integers(1, 3), st.integers(1, 3), st.floats(-2, 2, allow_nan=False)), min_size=1, max_size=4),
)
def test_product_method_property(n, terms):
    coeffs = MultiIndexCoeffs(2, cosine_basis(3), {(a, b): c for a, b, c in terms})
    if not coeffs.coeffs:
        return
    form = KForm(coeffs=coeffs, n=n)
    eps = all_sign_vectors(n)
    assert np.allclose(kform_eval(form, eps, "product"), kform_eval(form, eps, "direct"), atol=1e-10)
    assert math.isclose(exact_expectation(lambda e: kform_eval(form, e), n), 0.0, abs_tol=1e-12)
