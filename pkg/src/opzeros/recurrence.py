"""Orthonormal polynomials, solutions, transfer matrices, CD kernels, Pruefer angles.

Conventions: ``p_0 = mass^{-1/2}``, ``a_0 = 1``, and the solution ``u(E, theta)``
of ``a_n u_{n+1} + (b_n - E) u_n + a_{n-1} u_{n-1} = 0`` starts from
``u_0 = sin(theta)``, ``u_1 = cos(theta)``, so ``u_n(E, 0) = p_{n-1}(E)``.
``T(n, E)`` maps ``(u_1, u_0)`` to ``(u_{n+1}, u_n)`` and has determinant
``1 / a_n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import JacobiParams

__all__ = [
    "SolutionTrace",
    "TransferMatrix",
    "PruferBranch",
    "RefinementError",
    "eval_orthonormal",
    "orthonormal_table",
    "eval_solution",
    "transfer",
    "transfer_log_norms",
    "monodromy",
    "wronskian",
    "cd_kernel",
    "kernel_diagonal",
    "log_kernel_diagonal",
    "tail_pair",
    "prufer_derivative",
    "prufer_branch",
    "pivot_counts",
]

_BIG = 2.0**500
_SHIFT = -500


class RefinementError(RuntimeError):
    """Adaptive grid refinement exceeded its depth cap."""


def orthonormal_table(a: np.ndarray, b: np.ndarray, n: int, x, p0: float = 1.0) -> np.ndarray:
    """Rows ``p_0 .. p_n`` evaluated at every entry of ``x`` (shape ``(n+1, len(x))``)."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty((n + 1, x.size))
    out[0] = p0
    if n >= 1:
        out[1] = (x - b[0]) * p0 / a[0]
    for k in range(1, n):
        out[k + 1] = ((x - b[k]) * out[k] - a[k - 1] * out[k - 1]) / a[k]
    return out


def eval_orthonormal(params: JacobiParams, n: int, x: float, logscale: bool = False,
                     mass: float = 1.0):
    """``p_0(x) .. p_n(x)``.

    With ``logscale=True`` returns ``(mantissas, exponents)`` such that
    ``p_k = mantissas[k] * 2**exponents[k]``; otherwise an overflow raises.
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    a, b = params.coeffs(n)
    p0 = mass ** -0.5
    if not logscale:
        with np.errstate(over="ignore", invalid="ignore"):
            vals = orthonormal_table(a, b, n, [x], p0)[:, 0]
        if not np.all(np.isfinite(vals)):
            raise OverflowError("orthonormal recursion overflowed; use logscale=True")
        return vals
    mant = np.empty(n + 1)
    expo = np.zeros(n + 1, dtype=np.int64)
    prev, cur, e = 0.0, p0, 0
    mant[0] = cur
    for k in range(n):
        nxt = ((x - b[k]) * cur - (a[k - 1] if k else 0.0) * prev) / a[k]
        prev, cur = cur, nxt
        if abs(cur) > _BIG:
            prev *= 2.0**_SHIFT
            cur *= 2.0**_SHIFT
            e -= _SHIFT
        mant[k + 1] = cur
        expo[k + 1] = e
    return mant, expo


@dataclass(frozen=True)
class SolutionTrace:
    """Solution ``u_0 .. u_N`` at energy ``energy`` with boundary angle ``theta``.

    When ``logscale`` is set, the true value is ``values[k] * 2**logscale[k]``.
    """

    values: np.ndarray
    theta: float
    energy: float
    logscale: np.ndarray | None = None

    def unscaled(self) -> np.ndarray:
        if self.logscale is None:
            return self.values
        with np.errstate(over="ignore"):
            return np.ldexp(self.values, self.logscale)


def eval_solution(params: JacobiParams, theta: float, E: float, N: int,
                  logscale: bool | None = None) -> SolutionTrace:
    """Solution trace ``u_0 .. u_N``; log scaling engages automatically for long
    traces or once ``|u|`` exceeds ``2^500``."""
    if not 0.0 <= theta < math.pi:
        raise ValueError("theta must lie in [0, pi)")
    a, b = params.coeffs(max(N, 1))
    vals = np.empty(N + 1)
    expo = np.zeros(N + 1, dtype=np.int64)
    u_prev, u = math.sin(theta), math.cos(theta)
    vals[0] = u_prev
    if N >= 1:
        vals[1] = u
    e = 0
    scaled = False
    for n in range(1, N):
        a_prev = a[n - 2] if n >= 2 else 1.0
        nxt = ((E - b[n - 1]) * u - a_prev * u_prev) / a[n - 1]
        u_prev, u = u, nxt
        if abs(u) > _BIG:
            u_prev *= 2.0**_SHIFT
            u *= 2.0**_SHIFT
            e -= _SHIFT
            scaled = True
        vals[n + 1] = u
        expo[n + 1] = e
    use_log = scaled if logscale is None else logscale
    if logscale is None and N > 1000:
        use_log = True
    if not use_log:
        if scaled:
            raise OverflowError("solution overflowed; request logscale")
        return SolutionTrace(vals, theta, E, None)
    return SolutionTrace(vals, theta, E, expo)


@dataclass(frozen=True)
class TransferMatrix:
    entries: np.ndarray
    n: int
    E: float

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.entries))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))


def _step(a_n: float, a_prev: float, b_n: float, E: float) -> np.ndarray:
    return np.array([[(E - b_n) / a_n, -a_prev / a_n], [1.0, 0.0]])


def transfer(params: JacobiParams, n: int, E: float) -> TransferMatrix:
    """``T(n, E)`` as an ordered product of one-step matrices."""
    if n < 1:
        raise ValueError("n must be at least 1")
    a, b = params.coeffs(n)
    M = np.eye(2)
    for k in range(1, n + 1):
        M = _step(a[k - 1], a[k - 2] if k >= 2 else 1.0, b[k - 1], E) @ M
    return TransferMatrix(M, n, float(E))


def _norm2x2(t11, t12, t21, t22):
    s = np.maximum(np.maximum(np.abs(t11), np.abs(t12)), np.maximum(np.abs(t21), np.abs(t22)))
    s = np.where(s > 0, s, 1.0)
    t11, t12, t21, t22 = t11 / s, t12 / s, t21 / s, t22 / s
    fro = t11 * t11 + t12 * t12 + t21 * t21 + t22 * t22
    det = t11 * t22 - t12 * t21
    disc = np.sqrt(np.maximum(fro * fro - 4.0 * det * det, 0.0))
    return s * np.sqrt(0.5 * (fro + disc))


def transfer_log_norms(params: JacobiParams, n: int, E, a0: float = 1.0,
                       every: bool = False) -> np.ndarray:
    """Natural log of ``||T(m, E)||`` on an energy array.

    Returns shape ``(len(E),)`` for ``m = n`` or, with ``every``, shape
    ``(n, len(E))`` for ``m = 1..n``.  ``a0`` replaces the boundary value
    ``a_0 = 1`` (``a0 = a_n`` gives the unimodular one-period monodromy).
    """
    E = np.atleast_1d(np.asarray(E, dtype=np.float64))
    a, b = params.coeffs(n)
    # columns: solution with (u1,u0) = (1,0) and (0,1)
    c0_prev = np.zeros_like(E)
    c0 = np.ones_like(E)
    c1_prev = np.ones_like(E)
    c1 = np.zeros_like(E)
    logscale = np.zeros_like(E)
    out = np.empty((n, E.size)) if every else None
    ln2 = math.log(2.0)
    for k in range(1, n + 1):
        ap = a0 if k == 1 else a[k - 2]
        n0 = ((E - b[k - 1]) * c0 - ap * c0_prev) / a[k - 1]
        n1 = ((E - b[k - 1]) * c1 - ap * c1_prev) / a[k - 1]
        c0_prev, c0, c1_prev, c1 = c0, n0, c1, n1
        big = np.maximum(np.maximum(np.abs(c0), np.abs(c1)), np.maximum(np.abs(c0_prev), np.abs(c1_prev)))
        hit = big > _BIG
        if np.any(hit):
            s = 2.0**_SHIFT
            c0[hit] *= s
            c1[hit] *= s
            c0_prev[hit] *= s
            c1_prev[hit] *= s
            logscale[hit] -= _SHIFT * ln2
        if every:
            out[k - 1] = np.log(_norm2x2(c0, c1, c0_prev, c1_prev)) + logscale
    if every:
        return out
    return np.log(_norm2x2(c0, c1, c0_prev, c1_prev)) + logscale


def monodromy(params: JacobiParams, n: int, E) -> np.ndarray:
    """One-period transfer matrices of the period-``n`` repetition (``a_0 := a_n``).

    Returns shape ``(len(E), 2, 2)``; each matrix has determinant one.
    """
    E = np.atleast_1d(np.asarray(E, dtype=np.float64))
    a, b = params.coeffs(n)
    M = np.broadcast_to(np.eye(2), (E.size, 2, 2)).copy()
    for k in range(1, n + 1):
        ap = a[n - 1] if k == 1 else a[k - 2]
        S = np.zeros((E.size, 2, 2))
        S[:, 0, 0] = (E - b[k - 1]) / a[k - 1]
        S[:, 0, 1] = -ap / a[k - 1]
        S[:, 1, 0] = 1.0
        M = S @ M
    return M


def wronskian(f, g, params: JacobiParams, n: int) -> float:
    """``a_n (f_{n+1} g_n - f_n g_{n+1})`` with ``a_0 = 1``."""
    f = f.unscaled() if isinstance(f, SolutionTrace) else np.asarray(f)
    g = g.unscaled() if isinstance(g, SolutionTrace) else np.asarray(g)
    an = 1.0 if n == 0 else params.a(n)
    return float(an * (f[n + 1] * g[n] - f[n] * g[n + 1]))


def _table_with_derivative(a, b, n, x, p0):
    """``p_k`` and ``p_k'`` for ``k = 0..n`` at points ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    p = np.empty((n + 1, x.size))
    d = np.zeros((n + 1, x.size))
    p[0] = p0
    if n >= 1:
        p[1] = (x - b[0]) * p0 / a[0]
        d[1] = p0 / a[0]
    for k in range(1, n):
        p[k + 1] = ((x - b[k]) * p[k] - a[k - 1] * p[k - 1]) / a[k]
        d[k + 1] = (p[k] + (x - b[k]) * d[k] - a[k - 1] * d[k - 1]) / a[k]
    return p, d


def cd_kernel(params: JacobiParams, n: int, x: float, y: float, method: str = "sum",
              mass: float = 1.0) -> float:
    """Christoffel-Darboux kernel ``K_n(x, y) = sum_{j<=n} p_j(x) p_j(y)``.

    ``method="cdformula"`` uses the closed CD formula; for ``|x - y|`` below
    ``1e-8`` times the local scale it switches to the confluent derivative form.
    """
    a, b = params.coeffs(n + 1)
    p0 = mass ** -0.5
    if method == "sum":
        t = orthonormal_table(a, b, n, [x, y], p0)
        return float(np.dot(t[:, 0], t[:, 1]))
    if method != "cdformula":
        raise ValueError(f"unknown method {method!r}")
    scale = max(1.0, abs(x), abs(y))
    if abs(x - y) < 1e-8 * scale:
        xm = 0.5 * (x + y)
        p, d = _table_with_derivative(a, b, n + 1, [xm], p0)
        return float(a[n] * (d[n + 1, 0] * p[n, 0] - d[n, 0] * p[n + 1, 0]))
    t = orthonormal_table(a, b, n + 1, [x, y], p0)
    px, py = t[:, 0], t[:, 1]
    return float(a[n] * (py[n + 1] * px[n] - py[n] * px[n + 1]) / (y - x))


def kernel_diagonal(params: JacobiParams, n: int, x, mass: float = 1.0) -> np.ndarray:
    """``K_n(x, x)`` on an array of points (sum form); ``inf`` past overflow."""
    with np.errstate(over="ignore"):
        return np.exp(log_kernel_diagonal(params, n, x, mass))


def log_kernel_diagonal(params: JacobiParams, n: int, x, mass: float = 1.0) -> np.ndarray:
    """``log K_n(x, x)``, propagating ``p_k`` with per-point rescaling so that
    exponentially growing polynomials do not overflow."""
    a, b = params.coeffs(max(n, 1))
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    p0 = mass ** -0.5
    prev = np.zeros(x.size)
    cur = np.full(x.size, p0)
    acc = cur * cur
    logs = np.zeros(x.size)  # true value = stored * exp(logs)
    for k in range(n):
        ap = a[k - 1] if k else 0.0
        prev, cur = cur, ((x - b[k]) * cur - ap * prev) / a[k]
        acc += cur * cur
        big = np.abs(cur) > 1e100
        if np.any(big):
            s = np.where(big, np.abs(cur), 1.0)
            prev /= s
            cur /= s
            acc /= s * s
            logs += np.log(s)
    return np.log(acc) + 2 * logs


# ---------------------------------------------------------------------------
# Pruefer angle


def tail_pair(params: JacobiParams, n: int, x):
    """``(p_{n-1}, p_n, sum_{j<n} p_j^2)`` at points ``x``, sharing a per-point scale.

    Scale-invariant ratios (the Pruefer angle and its derivative) are safe
    even where the polynomials themselves overflow.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    a, b = params.coeffs(n)
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    acc = np.zeros_like(x)
    for k in range(n):
        acc += cur * cur
        ap = a[k - 1] if k else 0.0
        nxt = ((x - b[k]) * cur - ap * prev) / a[k]
        prev, cur = cur, nxt
        hit = np.abs(cur) > _BIG
        if np.any(hit):
            s = 2.0**_SHIFT
            prev[hit] *= s
            cur[hit] *= s
            acc[hit] *= s * s
    return prev, cur, acc


def prufer_derivative(params: JacobiParams, n: int, E) -> np.ndarray:
    """``d theta_n / dE = sum_{j<n} p_j^2 / (a_n (p_{n-1}^2 + p_n^2))``."""
    pm, pn, acc = tail_pair(params, n, E)
    return acc / (params.a(n) * (pm * pm + pn * pn))


def _principal(params, n, E):
    pm, pn, _ = tail_pair(params, n, E)
    # angle of (p_{n-1}, p_n) reduced mod pi into [0, pi)
    return np.mod(np.arctan2(pn, pm), math.pi)


@dataclass(frozen=True)
class PruferBranch:
    """Continuous branch ``theta_n(E)`` on ``grid`` with ``tan theta = p_n/p_{n-1}``."""

    grid: np.ndarray
    theta: np.ndarray
    n: int
    derivative: np.ndarray
    refined_points: int = 0


def pivot_counts(a: np.ndarray, b: np.ndarray, n: int, x):
    """Sturm counts ``(#zeros of p_{n-1} < x, #zeros of p_n < x)`` from LDL^T pivots.

    A zero pivot is replaced by a tiny negative number, counting ``x`` itself
    as lying to the right of a zero it coincides with.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    tiny = np.finfo(float).tiny ** 0.5
    d = np.ones_like(x)
    cnt = np.zeros(x.shape, dtype=np.int64)
    prev = cnt
    for k in range(n):
        off = a[k - 1] * a[k - 1] if k else 0.0
        d = (b[k] - x) - off / d
        d = np.where(d == 0.0, -tiny, d)
        if k == n - 1:
            prev = cnt.copy()
        cnt = cnt + (d < 0)
    return prev, cnt


def prufer_branch(params: JacobiParams, n: int, grid, max_depth: int = 60) -> PruferBranch:
    """Unwrap ``theta_n`` along ``grid``, anchored below the Gershgorin bound.

    Steps are halved until each holds at most one zero of ``p_{n-1} p_n`` and
    turns by less than ``pi/2``.  The angle itself is pinned by the Sturm
    counts: with ``c`` zeros of ``p_{n-1} p_n`` below ``E``, ``theta_n(E)`` lies
    in ``((c-1) pi/2, c pi/2]``, a window shorter than ``pi``.  A step that
    reaches floating-point resolution (zeros of ``p_{n-1}`` and ``p_n`` less
    than an ulp apart, as for localized states) is therefore still resolved.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty grid")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    a, b = params.coeffs(n)
    lo, _ = params.gershgorin(n)
    e_low = min(lo - 1.0, float(grid[0]) - 1.0)
    pts = np.concatenate(([e_low], grid))
    psi = _principal(params, n, pts)
    c1, c2 = pivot_counts(a, b, n, pts)
    cnt = c1 + c2
    inserted = 0
    for depth in range(max_depth + 1):
        inc = np.mod(psi[1:] - psi[:-1], math.pi)
        bad = (inc >= 0.5 * math.pi) | (np.diff(cnt) > 1)
        if not np.any(bad):
            break
        if depth == max_depth:
            raise RefinementError(f"Pruefer refinement exceeded depth {max_depth}")
        idx = np.nonzero(bad)[0]
        mids = 0.5 * (pts[idx] + pts[idx + 1])
        split = (mids > pts[idx]) & (mids < pts[idx + 1])
        if not np.any(split):
            break
        idx, mids = idx[split], mids[split]
        m1, m2 = pivot_counts(a, b, n, mids)
        pts = np.insert(pts, idx + 1, mids)
        psi = np.insert(psi, idx + 1, _principal(params, n, mids))
        cnt = np.insert(cnt, idx + 1, m1 + m2)
        inserted += mids.size
    # below every zero of p_n and p_{n-1} the angle lies in (-pi/2, 0)
    centre = (cnt - 0.5) * (0.5 * math.pi)
    theta = psi + math.pi * np.round((centre - psi) / math.pi)
    keep = np.searchsorted(pts, grid)
    der = prufer_derivative(params, n, grid)
    return PruferBranch(grid, theta[keep], n, der, inserted)
