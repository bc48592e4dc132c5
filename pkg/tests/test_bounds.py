import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opzeros.bounds import (
    BoundError,
    a_operator_hs,
    bound_suite,
    concavity_check,
    discriminant,
    discriminant_zeros,
    interlace_check,
    kernel_gap_bound,
    kernel_matrix,
    kernel_spacing_lower,
    multiplicity_bound,
    prufer_spacing_bounds,
    quadrature_gap_bound,
    rotation_derivative_check,
    spacing_lower_bound,
    spacing_upper_bound,
    transfer_growth_profile,
    tunneling_bound,
)
from opzeros.recurrence import eval_solution
from opzeros.spectra import zeros

from conftest import make


def test_hs_free_small(free):
    st_ = a_operator_hs(free, 4, 0.0)
    assert st_.hs_norm == pytest.approx(2.0)
    # brute force from the explicit kernel matrix
    K = kernel_matrix(free, 4, 0.0)
    assert math.sqrt(np.sum(K * K)) == pytest.approx(2.0)


def test_hs_single_site(free):
    assert a_operator_hs(free, 1, 0.3).hs_norm == 0.0


def test_kernel_basis_invariance():
    # any unit-Wronskian pair of solutions gives the same kernel
    p = make("AlmostMathieu", coupling=0.5)
    L, E = 12, 0.4
    K = kernel_matrix(p, L, E)
    u = eval_solution(p, 0.0, E, L).unscaled()[1:]
    v = eval_solution(p, math.pi / 2, E, L).unscaled()[1:]
    rng = np.random.default_rng(3)
    M = rng.normal(size=(2, 2))
    M /= math.sqrt(abs(np.linalg.det(M)))
    if np.linalg.det(M) < 0:
        M[0] *= -1
    f, g = M[0, 0] * u + M[0, 1] * v, M[1, 0] * u + M[1, 1] * v

    def build(f, g):
        out = np.zeros((L, L))
        for i in range(L):
            for j in range(L):
                if j < i:
                    out[i, j] = f[i] * g[j] - g[i] * f[j]
        return out

    assert np.allclose(build(f, g), build(u, v), atol=1e-10)
    assert np.allclose(np.abs(build(u, v)), np.abs(np.tril(K, -1)), atol=1e-10)


def test_spacing_lower_free(free):
    r = spacing_lower_bound(free, 4, 0.0)
    assert r.bound_value == pytest.approx(1 / (2 * math.sqrt(2)))
    assert r.observed_value == pytest.approx(2 * 2 * math.cos(2 * math.pi / 5))
    assert r.satisfied


def test_spacing_lower_scaling(free):
    for L in (51, 301, 2000):
        r = spacing_lower_bound(free, L, 0.0)
        assert r.satisfied
    assert r.observed_value * 2000 == pytest.approx(2 * math.pi, rel=2e-3)


def test_spacing_lower_random():
    assert spacing_lower_bound(make("IIDRandom", coupling=3.0), 500, 0.0).satisfied


def test_tunneling_free(free):
    r = tunneling_bound(free, 3)
    assert r.context["gamma"] == pytest.approx(math.sqrt(6))
    assert r.bound_value == pytest.approx(5 / (6**3 - 1))
    assert r.observed_value == pytest.approx(math.sqrt(2))
    assert r.satisfied


@pytest.mark.parametrize("eps", [1e-1, 1e-3, 1e-6])
def test_tunneling_decoupling(eps):
    from opzeros.models import from_arrays

    p = from_arrays([eps, 1.0], [0.0, 0.5])
    r = tunneling_bound(p, 2)
    assert r.satisfied


def test_multiplicity_free(free):
    r = multiplicity_bound(free, 4, 0.0, 2)
    assert r.bound_value == pytest.approx(0.5 * 0.5 * math.sqrt(2))
    assert r.observed_value == pytest.approx(2 * math.cos(2 * math.pi / 5))
    assert r.satisfied
    assert multiplicity_bound(free, 4, 0.0, 4).satisfied


def test_multiplicity_clock(free):
    assert multiplicity_bound(free, 1000, 0.0, 10).satisfied


def test_discriminant_free(free):
    assert discriminant(free, 1, 0.37) == pytest.approx(0.37)
    th = np.linspace(0.1, 3.0, 9)
    assert np.allclose(discriminant(free, 7, 2 * np.cos(th)), 2 * np.cos(7 * th), atol=1e-12)


def test_discriminant_zeros_free(free):
    k = np.arange(4, 0, -1)
    assert np.allclose(discriminant_zeros(free, 4), 2 * np.cos((2 * k - 1) * np.pi / 8), atol=1e-12)


def test_interlace(free):
    assert interlace_check(free, 4).ok
    assert interlace_check(make("BoundedVariation"), 30).ok


def test_rotation_derivative(free):
    assert rotation_derivative_check(free, 5).satisfied
    assert rotation_derivative_check(make("Periodic", a=[1.0, 1.0], b=[1.0, -1.0]), 2).satisfied
    r = rotation_derivative_check(free, 101)
    assert r.satisfied


def test_spacing_upper_free(free):
    r = spacing_upper_bound(free, 101, (-1.0, 1.0))
    assert r.satisfied
    assert spacing_upper_bound(free, 11, (-1.0, 1.0)).satisfied


def test_spacing_upper_edge_decay():
    assert spacing_upper_bound(make("EdgeDecay", gamma=3.0, offset=1), 500, (-1.0, 1.0)).satisfied


def test_spacing_upper_needs_two_zeros(free):
    with pytest.raises(BoundError):
        spacing_upper_bound(free, 10, (0.05, 0.06))


@pytest.mark.parametrize("variant,n", [("Free", 200), ("L1Decay", 500)])
def test_prufer_bounds(variant, n):
    p = make(variant)
    lo, hi = prufer_spacing_bounds(p, n, (-1.0, 1.0))
    assert lo.satisfied and hi.satisfied
    assert lo.kind == "lower" and hi.kind == "upper"


def test_quadrature_gap_chebyshev(cheb_t):
    for j in range(1, 10):
        r = quadrature_gap_bound(cheb_t, 10, j, method="integrate")
        assert r.observed_value == pytest.approx(0.1, abs=1e-9)
        assert r.bound_value == pytest.approx(0.2, abs=1e-12)
        assert r.satisfied


def test_quadrature_gap_weight():
    p = make("Weight", alpha=0.5, n_coeffs=201)
    assert quadrature_gap_bound(p, 50, 25).satisfied


@pytest.mark.parametrize("variant,params", [("IIDRandom", {"coupling": 3.0}),
                                            ("AlmostMathieu", {"coupling": 0.5})])
def test_quadrature_gap_gauss_measure(variant, params):
    p = make(variant, **params)
    for j in (1, 5, 9):
        assert quadrature_gap_bound(p, 10, j).satisfied


def test_kernel_gap(free):
    z = zeros(free, 100).zeros
    i = int(np.argmin(np.abs(z)))
    q = int(math.log(100))
    p_ = 1
    while (2 * (p_ + 1) - 2) ** (2 * q) <= 199:
        p_ += 1
    r = kernel_gap_bound(free, 100, (z[i], z[i + 1]), p_, q)
    assert r.satisfied
    z10 = zeros(free, 10).zeros
    assert kernel_gap_bound(free, 10, (z10[4], z10[5]), 2, 1).satisfied


def test_kernel_gap_constraint(free):
    z = zeros(free, 10).zeros
    with pytest.raises(BoundError):
        kernel_gap_bound(free, 10, (z[4], z[5]), 5, 2)
    with pytest.raises(BoundError):
        kernel_gap_bound(free, 10, (z[3], z[5]), 2, 1)


def test_kernel_gap_weight(sqrt_weight):
    z = zeros(sqrt_weight, 200).zeros
    i = 99
    assert kernel_gap_bound(sqrt_weight, 200, (z[i], z[i + 1]), 3, 2).satisfied


def test_kernel_spacing_lower(free):
    z = zeros(free, 50).zeros
    i = int(np.searchsorted(z, 0.0))
    r = kernel_spacing_lower(free, 50, (z[i - 1], z[i]), 0.5)
    assert r.satisfied
    with pytest.raises(BoundError):
        kernel_spacing_lower(free, 50, (z[i - 1], z[i]), 0.01)


def test_growth_regimes(free):
    ns = [100, 200, 400, 800, 1600, 3200]
    g = transfer_growth_profile(free, 1.0, ns)
    assert abs(g.slope_sqrt) < 0.05 and abs(g.slope_lin) < 1e-3
    iid = transfer_growth_profile(make("IIDRandom", coupling=3.0), 0.0, ns)
    assert iid.slope_lin > 0 and iid.resid_lin <= iid.resid_sqrt
    l2 = transfer_growth_profile(make("L2Decay"), 0.5, [100, 400, 1600, 6400, 10000])
    assert l2.resid_sqrt <= l2.resid_lin


def test_growth_needs_increasing(free):
    with pytest.raises(ValueError):
        transfer_growth_profile(free, 0.0, [10, 5])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=12, unique=True))
def test_concavity_random(roots):
    roots = np.asarray(roots)
    assume_spread = np.min(np.diff(np.sort(roots))) > 1e-3
    if not assume_spread:
        return
    for r in concavity_check(roots):
        assert r.satisfied, r.context


def test_concavity_fixed_batch():
    rng = np.random.default_rng(0)
    for _ in range(200):
        roots = np.sort(rng.uniform(-3, 3, size=rng.integers(2, 15)))
        if np.min(np.diff(roots)) < 1e-6:
            continue
        assert all(r.satisfied for r in concavity_check(roots))


def test_suite_names(free):
    reps = bound_suite(free, 50, 0.1)
    names = [r.name for r in reps]
    assert len(names) == len(set(names)) == 9
    assert all(r.satisfied for r in reps)
    d = reps[0].to_dict()
    assert set(d) >= {"name", "bound", "observed", "satisfied", "context"}
