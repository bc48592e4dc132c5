import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from opzeros.spectra import (
    christoffel_function,
    christoffel_numbers,
    dos_counting,
    dos_derivative,
    kernel_growth_exponent,
    quadrature_exactness,
    sturm_count,
    write_nodes_csv,
    zeros,
)

from conftest import free_zeros, make


@pytest.mark.parametrize("x,count", [(-3.0, 0), (0.0, 1), (3.0, 3)])
def test_sturm_small(free, x, count):
    assert sturm_count(free, 3, x) == count


@settings(max_examples=40, deadline=None)
@given(st.floats(-2.5, 2.5))
def test_sturm_matches_closed_form(x):
    z = free_zeros(25)
    # the closed form carries rounding; stay clear of the zeros themselves
    assume(np.min(np.abs(z - x)) > 1e-12)
    assert sturm_count(make("Free"), 25, x) == int(np.sum(z < x))


def test_free_zeros_small(free):
    zs = zeros(free, 3)
    assert np.allclose(zs.zeros, [-math.sqrt(2), 0, math.sqrt(2)], atol=zs.tol)


def test_free_zeros_100(free):
    zs = zeros(free, 100)
    assert np.max(np.abs(zs.zeros - free_zeros(100))) < max(zs.tol, 1e-12)
    assert np.all(np.diff(zs.zeros) > 0)


@pytest.mark.parametrize("n", [1, 7, 64])
def test_resonant_zeros(n):
    zs = zeros(make("Resonant"), n)
    k = np.arange(n, 0, -1)
    assert np.max(np.abs(zs.zeros - 2 * np.cos((k - 0.5) * np.pi / n))) <= zs.tol + 1e-15


def test_zeros_are_eigenvalues():
    p = make("IIDRandom", coupling=3.0, seed=2)
    a, b = p.coeffs(80)
    J = np.diag(b) + np.diag(a[:-1], 1) + np.diag(a[:-1], -1)
    assert np.allclose(zeros(p, 80).zeros, np.linalg.eigvalsh(J), atol=1e-11)


def test_counting_measure(free):
    zs = zeros(free, 2001)
    assert dos_counting(zs, -5.0) == 0.0
    assert dos_counting(zs, 5.0) == 1.0
    assert dos_counting(zs, 0.0) == pytest.approx(0.5, abs=1e-3)


def test_density_estimates(free):
    zs = zeros(free, 10_000)
    assert dos_derivative(zs, 0.0).value == pytest.approx(1 / (2 * math.pi), rel=0.02)
    assert dos_derivative(zs, 1.0).value == pytest.approx(1 / (math.pi * math.sqrt(3)), rel=0.02)
    assert dos_derivative(zs, 3.0).value == 0.0


def test_gauss_weights_free_three(free):
    q = christoffel_numbers(free, 3)
    assert np.allclose(q.weights, [0.25, 0.5, 0.25], atol=1e-14)


@pytest.mark.parametrize("n", [1, 5, 33])
def test_chebyshev_t_weights(cheb_t, n):
    q = christoffel_numbers(cheb_t, n)
    assert np.allclose(q.weights, 1.0 / n, atol=1e-12)


@pytest.mark.parametrize("variant,params", [("L1Decay", {}), ("AlmostMathieu", {"coupling": 0.5}),
                                            ("IIDRandom", {"coupling": 3.0})])
def test_unit_mass(variant, params):
    q = christoffel_numbers(make(variant, **params), 40)
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(q.weights > 0)


def test_exactness_low_moments():
    p = make("L1Decay")
    lhs, rhs, _ = quadrature_exactness(p, 6, 0)
    assert lhs == pytest.approx(1.0) and rhs == pytest.approx(1.0)
    lhs, rhs, _ = quadrature_exactness(p, 6, 1)
    assert lhs == pytest.approx(p.b(1)) and rhs == pytest.approx(p.b(1))


def test_exactness_free_ninth_moment(free):
    assert quadrature_exactness(free, 5, 9)[2] < 1e-10
    with pytest.raises(ValueError):
        quadrature_exactness(free, 5, 10)


def test_weight_routes_agree():
    p = make("L1Decay")
    e = christoffel_numbers(p, 30)
    k = christoffel_numbers(p, 30, method="kernel")
    assert np.allclose(e.weights, k.weights, rtol=1e-9)


def test_localized_weights_match_eigenvectors():
    p = make("IIDRandom", coupling=3.0)
    n = 300
    a, b = p.coeffs(n)
    J = np.diag(b) + np.diag(a[:-1], 1) + np.diag(a[:-1], -1)
    _, v = np.linalg.eigh(J)
    ref = v[0] ** 2
    w = christoffel_numbers(p, n).weights
    big = ref > 1e-200
    assert np.allclose(w[big], ref[big], rtol=1e-8)


def test_christoffel_function_closed(free, cheb_t):
    for n in (3, 10, 41):
        assert christoffel_function(cheb_t, n, 1.0) == pytest.approx(1 / (2 * n + 1))
        assert christoffel_function(free, n, 0.0) == pytest.approx(1 / (n // 2 + 1))


def test_christoffel_function_linear_in_measure():
    p = make("BoundedVariation")
    assert christoffel_function(p, 12, 0.4, mass=2.0) == pytest.approx(
        2 * christoffel_function(p, 12, 0.4), rel=1e-12)


def test_growth_exponents(free, cheb_t):
    assert kernel_growth_exponent(free, 0.0, [50, 100, 200, 400])[0] == pytest.approx(1.0, abs=0.05)
    assert kernel_growth_exponent(cheb_t, 1.0, [50, 100, 200, 400])[0] == pytest.approx(1.0, abs=0.05)


def test_nodes_csv(tmp_path, free):
    path = tmp_path / "nodes.csv"
    zs = zeros(free, 5)
    write_nodes_csv(path, zs, christoffel_numbers(free, 5, zs))
    rows = path.read_text().strip().splitlines()
    assert len(rows) == 6
    back = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert np.array_equal(back, zs.zeros)
