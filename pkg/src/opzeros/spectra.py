"""Zeros of ``p_n`` by Sturm bisection, zero-counting measures, Christoffel numbers."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .models import JacobiParams
from .recurrence import log_kernel_diagonal, orthonormal_table

__all__ = [
    "ZeroSet",
    "Quadrature",
    "DosEstimate",
    "sturm_count",
    "sturm_counts",
    "zeros",
    "dos_counting",
    "dos_derivative",
    "christoffel_numbers",
    "quadrature_exactness",
    "christoffel_function",
    "kernel_growth_exponent",
    "write_nodes_csv",
]


@dataclass(frozen=True)
class ZeroSet:
    """Zeros of ``p_n`` in increasing order."""

    n: int
    zeros: np.ndarray
    bracket: tuple[float, float]
    tol: float

    def __len__(self):
        return self.n

    def gaps(self) -> np.ndarray:
        return np.diff(self.zeros)


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.nodes.size


def sturm_counts(a: np.ndarray, b: np.ndarray, n: int, x, eps: float | None = None) -> np.ndarray:
    """Vectorized ``#{eigenvalues of J_n < x}``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if eps is None:
        lo = np.min(b[:n]) - 2 * np.max(a[:n]) if n else 0.0
        hi = np.max(b[:n]) + 2 * np.max(a[:n]) if n else 1.0
        eps = np.finfo(float).tiny * max(hi - lo, 1.0)
    d = np.ones_like(x)
    cnt = np.zeros(x.shape, dtype=np.int64)
    for k in range(n):
        off = a[k - 1] * a[k - 1] if k else 0.0
        # after a zero pivot off/eps may overflow to -inf; the next pivot is then exact
        with np.errstate(over="ignore"):
            d = (b[k] - x) - off / d
        # a zero pivot means x hits a sub-block eigenvalue; +eps keeps it uncounted
        d[d == 0.0] = eps
        cnt += d < 0
    return cnt


def sturm_count(params: JacobiParams, n: int, x: float) -> int:
    """Number of eigenvalues of ``J_{n;F}`` strictly below ``x``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    a, b = params.coeffs(n)
    return int(sturm_counts(a, b, n, [x])[0])


def _bisect(a, b, n, lo, hi, ks, tol, eps):
    """Shrink brackets ``[lo, hi]`` with ``count(lo) < k <= count(hi)``."""
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(200):
        width = hi - lo
        active = width > tol
        if not np.any(active):
            break
        mid = 0.5 * (lo + hi)
        stuck = (mid <= lo) | (mid >= hi)
        active &= ~stuck
        if not np.any(active):
            break
        c = sturm_counts(a, b, n, mid[active], eps)
        idx = np.nonzero(active)[0]
        right = c >= ks[idx]
        hi[idx[right]] = mid[active][right]
        lo[idx[~right]] = mid[active][~right]
    return lo, hi


def zeros(params: JacobiParams, n: int, tol: float | None = None) -> ZeroSet:
    """Zeros of ``p_n`` (eigenvalues of ``J_{n;F}``) by Sturm bisection.

    A LAPACK estimate seeds narrow brackets; each bracket is verified by Sturm
    counts and falls back to the full Gershgorin interval otherwise, so the
    result carries the bisection guarantee regardless of the seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    a, b = params.coeffs(n)
    glo, ghi = params.gershgorin(n)
    width = max(ghi - glo, np.finfo(float).eps)
    if tol is None:
        tol = 1e-12 * width
    if tol <= 0:
        raise ValueError("tol must be positive")
    eps = np.finfo(float).tiny * width
    ks = np.arange(1, n + 1)
    if n == 1:
        guess = np.array([b[0]])
    else:
        guess = np.sort(eigvalsh_tridiagonal(b, a[: n - 1]))
    pad = max(tol, 64 * np.finfo(float).eps * width)
    lo = np.maximum(guess - pad, glo)
    hi = np.minimum(guess + pad, ghi)
    c_lo = sturm_counts(a, b, n, lo, eps)
    c_hi = sturm_counts(a, b, n, hi, eps)
    bad = (c_lo >= ks) | (c_hi < ks)
    lo[bad] = glo
    hi[bad] = ghi
    lo, hi = _bisect(a, b, n, lo, hi, ks, tol, eps)
    z = 0.5 * (lo + hi)
    achieved = float(np.max(hi - lo)) if n else 0.0
    return ZeroSet(n, z, (glo, ghi), achieved)


def dos_counting(zs: ZeroSet, E: float) -> float:
    """``(1/n) #{zeros <= E}``."""
    return float(np.searchsorted(zs.zeros, E, side="right")) / zs.n


@dataclass(frozen=True)
class DosEstimate:
    value: float
    window: float
    undersampled: bool


def dos_derivative(zs: ZeroSet, E: float, window: float | None = None) -> DosEstimate:
    """Symmetric difference quotient of the counting measure at ``E``.

    ``undersampled`` is set when the window is narrower than the mean zero
    spacing.
    """
    if window is None:
        window = zs.n ** -0.5
    if window <= 0:
        raise ValueError("window must be positive")
    val = (dos_counting(zs, E + window) - dos_counting(zs, E - window)) / (2 * window)
    if zs.n > 1:
        spacing = (zs.zeros[-1] - zs.zeros[0]) / (zs.n - 1)
    else:
        spacing = math.inf
    return DosEstimate(val, window, bool(window < spacing))


def _eigvec_weights(a, b, n, nodes, budget=1 << 22):
    """Squared first components of the normalized eigenvectors of ``J_n`` at the
    given eigenvalues.

    Each vector comes from a twisted factorization: forward and backward LDL^T
    pivots meet at the index where the twist is smallest, and the vector is
    unrolled outward from there in log form.  Node slices keep the pivot tables
    within ``budget`` entries.
    """
    nodes = np.asarray(nodes, dtype=np.float64)
    if n == 1:
        return np.ones(nodes.size)
    a = a[: n - 1]
    b = b[:n]
    tiny = 1e-300
    out = np.empty(nodes.size)
    step = max(1, budget // n)
    for s in range(0, nodes.size, step):
        x = nodes[s : s + step]
        c = b[:, None] - x[None, :]
        D = np.empty_like(c)
        R = np.empty_like(c)
        D[0] = c[0]
        for k in range(1, n):
            prev = np.where(D[k - 1] == 0.0, tiny, D[k - 1])
            D[k] = c[k] - a[k - 1] ** 2 / prev
        R[-1] = c[-1]
        for k in range(n - 2, -1, -1):
            nxt = np.where(R[k + 1] == 0.0, tiny, R[k + 1])
            R[k] = c[k] - a[k] ** 2 / nxt
        r = np.argmin(np.abs(D + R - c), axis=0)
        with np.errstate(divide="ignore"):
            # log|z_k / z_{k+1}| above the twist, log|z_{k+1} / z_k| below it
            up = np.log(a)[:, None] - np.log(np.abs(np.where(D[:-1] == 0.0, tiny, D[:-1])))
            dn = np.log(a)[:, None] - np.log(np.abs(np.where(R[1:] == 0.0, tiny, R[1:])))
        k = np.arange(n)[:, None]
        logz = np.zeros_like(c)
        # for k < r: log|z_k| = sum_{i=k}^{r-1} up_i
        upm = np.where(k[:-1] < r[None, :], up, 0.0)
        logz[:-1] = np.cumsum(upm[::-1], axis=0)[::-1]
        # for k > r: log|z_k| = sum_{i=r}^{k-1} dn_i
        dnm = np.where(k[1:] > r[None, :], dn, 0.0)
        logz[1:] += np.cumsum(dnm, axis=0)
        top = logz.max(axis=0)
        lognorm2 = 2 * top + np.log(np.sum(np.exp(2 * (logz - top)), axis=0))
        out[s : s + step] = np.exp(2 * logz[0] - lognorm2)
    return out


def christoffel_numbers(params: JacobiParams, n: int, zs: ZeroSet | None = None,
                        mass: float = 1.0, method: str = "eigvec") -> Quadrature:
    """Gauss nodes and weights ``lambda_j = 1 / K_{n-1}(x_j, x_j)``.

    ``method="kernel"`` evaluates that formula at the computed zeros.  Where an
    eigenvector is localized far from the first site the kernel grows fast
    enough that a node error of one ulp swamps the weight, so the default takes
    the same numbers as ``mass * v_1^2`` from the eigenvectors of ``J_n``.
    """
    if zs is None:
        # x^k amplifies a node error by k/|x|, so exactness up to degree 2n-1
        # needs nodes near working precision rather than the default tolerance
        glo, ghi = params.gershgorin(n)
        zs = zeros(params, n, tol=16 * np.finfo(float).eps * max(ghi - glo, 1.0))
    if method == "kernel":
        w = np.exp(-log_kernel_diagonal(params, n - 1, zs.zeros, mass=mass))
    elif method == "eigvec":
        a, b = params.coeffs(n)
        # the vector error is linear in the shift error, so shift by the
        # ulp-accurate LAPACK eigenvalues rather than the bisection midpoints
        shifts = np.sort(eigvalsh_tridiagonal(b, a[: n - 1])) if n > 1 else b[:1]
        w = mass * _eigvec_weights(a, b, n, shifts)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Quadrature(zs.zeros, w)


def _moment(a, b, k):
    """``<delta_1, J^k delta_1>`` by repeated tridiagonal products."""
    m = k // 2 + 2
    v = np.zeros(m)
    v[0] = 1.0
    aa = np.zeros(m)
    aa[: min(m - 1, a.size)] = a[: m - 1]
    bb = np.zeros(m)
    bb[: min(m, b.size)] = b[:m]
    half = k // 2
    w = v
    for _ in range(half):
        nxt = bb * w
        nxt[:-1] += aa[:-1] * w[1:]
        nxt[1:] += aa[:-1] * w[:-1]
        w = nxt
    if k % 2 == 0:
        return float(w @ w)
    Jw = bb * w
    Jw[:-1] += aa[:-1] * w[1:]
    Jw[1:] += aa[:-1] * w[:-1]
    return float(w @ Jw)


def quadrature_exactness(params: JacobiParams, n: int, k: int, quad: Quadrature | None = None):
    """Compare the ``k``-th moment with its Gauss rule; returns ``(lhs, rhs, residual)``."""
    if k < 0:
        raise ValueError("moment order must be non-negative")
    if k >= 2 * n:
        raise ValueError("exactness not guaranteed beyond degree 2n-1")
    if quad is None:
        quad = christoffel_numbers(params, n)
    need = k // 2 + 2
    if params.length is not None:
        need = min(need, params.length)
    a, b = params.coeffs(need)
    lhs = _moment(a, b, k)
    rhs = float(np.sum(quad.weights * quad.nodes**k))
    scale = float(np.sum(quad.weights * np.abs(quad.nodes) ** k))
    return lhs, rhs, abs(lhs - rhs) / max(scale, np.finfo(float).tiny)


def christoffel_function(params: JacobiParams, n: int, x0: float, mass: float = 1.0) -> float:
    """``lambda_n(x0) = K_n(x0, x0)^{-1}``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return float(np.exp(-log_kernel_diagonal(params, n, [x0], mass=mass)[0]))


def kernel_growth_exponent(params: JacobiParams, x0: float, n_list) -> tuple[float, float]:
    """Least-squares slope of ``log K_n(x0, x0)`` against ``log n`` and its RMS residual."""
    ns = np.asarray(n_list, dtype=np.int64)
    if ns.size < 4 or np.any(np.diff(ns) <= 0):
        raise ValueError("n_list must be increasing with at least 4 entries")
    a, b = params.coeffs(int(ns[-1]))
    t = orthonormal_table(a, b, int(ns[-1]), [x0])[:, 0]
    K = np.cumsum(t * t)[ns]
    X = np.log(ns.astype(float))
    Y = np.log(K)
    slope, icept = np.polyfit(X, Y, 1)
    resid = float(np.sqrt(np.mean((Y - (slope * X + icept)) ** 2)))
    return float(slope), resid


def write_nodes_csv(path, zs: ZeroSet, quad: Quadrature | None = None, digits: int = 17):
    fmt = f"{{:.{digits}g}}"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "zero", "weight"])
        for j, x in enumerate(zs.zeros, start=1):
            wt = fmt.format(quad.weights[j - 1]) if quad is not None else ""
            w.writerow([j, fmt.format(x), wt])
