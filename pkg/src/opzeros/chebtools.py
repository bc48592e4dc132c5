"""Chebyshev polynomials, Dirichlet-type trial polynomials, Bernstein checks and
the two-node trial polynomial used for off-diagonal Christoffel bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

__all__ = [
    "TrialPoly",
    "BernsteinReport",
    "OffdiagTrial",
    "cheb_T",
    "dirichlet_D",
    "dirichlet_closed_form",
    "dirichlet_trial",
    "trial_envelope",
    "bernstein_check",
    "offdiag_trial",
]


def cheb_T(n: int, x):
    """``T_n(x)`` by the three-term recurrence; valid for every real ``x``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    t0 = np.ones_like(x)
    if n == 0:
        return t0 if t0.ndim else float(t0)
    t1 = x.copy()
    for _ in range(n - 1):
        t0, t1 = t1, 2 * x * t1 - t0
    return t1 if t1.ndim else float(t1)


def dirichlet_D(n: int, x):
    """``D_n(x) = (1/n) sum_{j<n} (-1)^j T_{2j}(x)``, a polynomial of degree ``2n - 2``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    x = np.asarray(x, dtype=np.float64)
    # T_{2j}(x) = T_j(2x^2 - 1)
    y = 2 * x * x - 1
    prev, cur = np.ones_like(y), y.copy()
    s = prev.copy()
    for j in range(1, n):
        s += -cur if j % 2 else cur
        prev, cur = cur, 2 * y * cur - prev
    out = s / n
    return out if out.ndim else float(out)


def dirichlet_closed_form(n: int, theta):
    """``D_n(cos theta) = 1/(2n) + (-1)^{n-1} cos((2n-1) theta) / (2n cos theta)``."""
    theta = np.asarray(theta, dtype=np.float64)
    return 1.0 / (2 * n) + (-1) ** (n - 1) * np.cos((2 * n - 1) * theta) / (2 * n * np.cos(theta))


@dataclass(frozen=True)
class TrialPoly:
    """``x -> D_n((x - x0) / a)``."""

    n: int
    x0: float
    a: float

    @property
    def degree(self) -> int:
        return 2 * self.n - 2

    def __call__(self, x):
        return dirichlet_D(self.n, (np.asarray(x, dtype=np.float64) - self.x0) / self.a)


def dirichlet_trial(n: int, x0: float, a: float) -> TrialPoly:
    if n < 1:
        raise ValueError("n must be at least 1")
    if not a > 0:
        raise ValueError("a must be positive")
    return TrialPoly(n, float(x0), float(a))


def trial_envelope(trial: TrialPoly, x):
    """``min(1, 1/(2n) + a / (2n |x - x0|))`` on ``|x - x0| <= a``."""
    x = np.asarray(x, dtype=np.float64)
    d = np.abs(x - trial.x0)
    n = trial.n
    with np.errstate(divide="ignore"):
        env = np.minimum(1.0, 1.0 / (2 * n) + trial.a / (2 * n * d))
    return env


# ---------------------------------------------------------------------------
# Bernstein


@dataclass(frozen=True)
class BernsteinReport:
    mode: str
    degree: int
    ratio: float
    sup_value: float
    sup_weighted_derivative: float


def _refine_max(f: Callable, grid: np.ndarray, vals: np.ndarray, lo: float, hi: float, k: int = 8):
    """Golden-section polish around the ``k`` largest grid values."""
    best = float(vals.max())
    order = np.argsort(vals)[::-1][:k]
    h = grid[1] - grid[0]
    g = (math.sqrt(5.0) - 1.0) / 2.0
    for i in order:
        a, b = max(grid[i] - h, lo), min(grid[i] + h, hi)
        c, d = b - g * (b - a), a + g * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(60):
            if fc > fd:
                b, d, fd = d, c, fc
                c = b - g * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + g * (b - a)
                fd = f(d)
        best = max(best, fc, fd)
    return best


def bernstein_check(coeffs, mode: str = "circle", a: float = 1.0, points: int = 4096) -> BernsteinReport:
    """Ratio of the two sides of Bernstein's inequality for the polynomial with
    power-basis ``coeffs`` (lowest degree first).

    ``circle``: ``sup |p'| / (n sup |p|)`` on ``|z| = 1``.
    ``interval``: ``sup sqrt(a^2 - x^2) |p'| / (3 n sup |p|)`` on ``[-a, a]``.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=np.complex128), "b")
    n = c.size - 1
    if n < 1:
        if c.size == 0:
            raise ValueError("zero polynomial")
        return BernsteinReport(mode, max(n, 0), 0.0, float(abs(c[0])), 0.0)
    dc = npoly.polyder(c)
    if mode == "circle":
        th = np.linspace(0.0, 2 * math.pi, points, endpoint=False)

        def fv(t):
            return np.abs(npoly.polyval(np.exp(1j * np.asarray(t)), c))

        def fd(t):
            return np.abs(npoly.polyval(np.exp(1j * np.asarray(t)), dc))

        vals = fv(th)
        dvals = fd(th)
        sup = _refine_max(lambda t: float(fv(t)), th, vals, -math.inf, math.inf)
        dsup = _refine_max(lambda t: float(fd(t)), th, dvals, -math.inf, math.inf)
        ratio = dsup / (n * sup)
    elif mode == "interval":
        if not a > 0:
            raise ValueError("a must be positive")
        x = np.linspace(-a, a, points)

        def fv(t):
            return np.abs(npoly.polyval(np.asarray(t), c))

        def fw(t):
            t = np.asarray(t)
            return np.sqrt(np.maximum(a * a - t * t, 0.0)) * np.abs(npoly.polyval(t, dc))

        sup = _refine_max(lambda t: float(fv(t)), x, fv(x), -a, a)
        dsup = _refine_max(lambda t: float(fw(t)), x, fw(x), -a, a)
        ratio = dsup / (3 * n * sup)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return BernsteinReport(mode, n, float(ratio), float(sup), float(dsup))


# ---------------------------------------------------------------------------
# two-node trial polynomial


@dataclass(frozen=True)
class OffdiagTrial:
    """``pi(x) = scale * (x - y)^k * prod_{l != j, j+1} (x - x_l)`` with ``k`` in {0, 1}."""

    nodes: np.ndarray
    j: int
    y: float | None
    scale: float

    @property
    def degree(self) -> int:
        return self.nodes.size - 2 + (self.y is not None)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        others = np.delete(self.nodes, [self.j - 1, self.j])
        v = np.full(x.shape, self.scale)
        for t in others:
            v = v * (x - t)
        if self.y is not None:
            v = v * (x - self.y)
        return v


def offdiag_trial(xs, j: int) -> OffdiagTrial:
    """Polynomial of degree at most ``len(xs) - 1`` vanishing at every node except
    ``x_j, x_{j+1}`` (1-based), equal to 1 at both of them and at least 1 between.

    When the product over the other nodes already takes equal values at the two
    nodes it is rescaled; otherwise one extra linear factor ``x - y`` with ``y``
    outside ``[x_j, x_{j+1}]`` equalizes them.
    """
    xs = np.asarray(xs, dtype=np.float64)
    m = xs.size
    if m < 2 or np.any(np.diff(xs) <= 0):
        raise ValueError("nodes must be strictly increasing, at least two")
    if not 1 <= j <= m - 1:
        raise ValueError("j must satisfy 1 <= j <= len(xs) - 1")
    xl, xr = xs[j - 1], xs[j]
    others = np.delete(xs, [j - 1, j])
    p_l = float(np.prod(xl - others))
    p_r = float(np.prod(xr - others))
    if abs(p_l - p_r) <= 1e-15 * max(abs(p_l), abs(p_r)):
        return OffdiagTrial(xs, j, None, 1.0 / p_l)
    # (xl - y) p_l = (xr - y) p_r  <=>  t = (y - xl)/(y - xr) = p_r / p_l; the
    # relation is linear in y, so the monotone sweep in t has a closed-form end
    t = p_r / p_l
    if t <= 0:
        raise ValueError("node products have opposite signs")
    y = (xl - t * xr) / (1.0 - t)
    return OffdiagTrial(xs, j, float(y), 1.0 / ((xl - y) * p_l))
