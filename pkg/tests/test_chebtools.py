import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opzeros.chebtools import (
    bernstein_check,
    cheb_T,
    dirichlet_D,
    dirichlet_closed_form,
    dirichlet_trial,
    offdiag_trial,
    trial_envelope,
)
from opzeros.spectra import zeros

from conftest import make


@given(st.integers(0, 30), st.floats(-1, 1))
def test_cheb_identity(n, x):
    assert cheb_T(n, x) == pytest.approx(math.cos(n * math.acos(x)), abs=1e-11)


def test_cheb_outside_interval():
    assert cheb_T(3, 2.0) == 26.0
    assert cheb_T(0, 5.0) == 1.0


def test_dirichlet_small():
    x = np.linspace(-1, 1, 11)
    assert np.allclose(dirichlet_D(1, x), 1.0)
    assert np.allclose(dirichlet_D(2, x), 1 - x * x)
    assert dirichlet_D(2, 0.0) == 1.0 and dirichlet_D(2, 1.0) == 0.0


@pytest.mark.parametrize("n", [3, 10, 64])
def test_dirichlet_closed_form(n):
    th = np.linspace(0.01, math.pi / 2 - 0.01, 200)
    assert np.allclose(dirichlet_D(n, np.cos(th)), dirichlet_closed_form(n, th), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 256), st.floats(-3, 3), st.floats(0.1, 5))
def test_envelope(n, x0, a):
    tp = dirichlet_trial(n, x0, a)
    assert tp(x0) == pytest.approx(1.0)
    x = np.linspace(x0 - a, x0 + a, 10_000)
    assert np.all(np.abs(tp(x)) <= trial_envelope(tp, x) + 1e-12)


def test_trial_degree_and_validation():
    assert dirichlet_trial(5, 0.0, 1.0).degree == 8
    with pytest.raises(ValueError):
        dirichlet_trial(5, 0.0, 0.0)


def test_bernstein_monomial():
    for n in (1, 7, 30):
        r = bernstein_check([0] * n + [1], "circle")
        assert r.ratio == pytest.approx(1.0, abs=1e-9)


def test_bernstein_constant():
    assert bernstein_check([3.0], "circle").ratio == 0.0
    assert bernstein_check([3.0], "interval").ratio == 0.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=20))
def test_bernstein_random(coeffs):
    if not any(abs(c) > 1e-3 for c in coeffs[1:]):
        return
    assert bernstein_check(coeffs, "circle").ratio <= 1 + 1e-9
    assert bernstein_check(coeffs, "interval").ratio <= 1 + 1e-9


def test_bernstein_bad_mode():
    with pytest.raises(ValueError):
        bernstein_check([0, 1], "torus")


def _check_offdiag(xs, j):
    t = offdiag_trial(xs, j)
    xs = np.asarray(xs, dtype=float)
    assert t.degree <= xs.size - 1
    others = np.delete(xs, [j - 1, j])
    assert np.allclose(t(others), 0.0, atol=1e-10)
    assert t(xs[j - 1]) == pytest.approx(1.0, abs=1e-10)
    assert t(xs[j]) == pytest.approx(1.0, abs=1e-10)
    mid = np.linspace(xs[j - 1], xs[j], 2001)
    assert np.all(t(mid) >= 1 - 1e-10)
    return t


def test_offdiag_three_nodes():
    t = _check_offdiag([-1.0, 0.0, 1.0], 2)
    assert t.y == pytest.approx(2.0)


def test_offdiag_two_nodes():
    t = _check_offdiag([-1.0, 1.0], 1)
    assert t.y is None and t.degree == 0
    assert np.allclose(t(np.linspace(-1, 1, 5)), 1.0)


def test_offdiag_free_zeros(free):
    z = zeros(free, 5).zeros
    for j in range(1, 5):
        _check_offdiag(z, j)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=9, unique=True), st.data())
def test_offdiag_random(xs, data):
    xs = np.sort(xs)
    if np.min(np.diff(xs)) < 1e-2:
        return
    j = data.draw(st.integers(1, xs.size - 1))
    _check_offdiag(xs, j)


def test_offdiag_validation():
    with pytest.raises(ValueError):
        offdiag_trial([1.0, 0.0], 1)
    with pytest.raises(ValueError):
        offdiag_trial([0.0, 1.0, 2.0], 3)
