"""A priori zero-spacing bounds, each returned as a (bound, observed, satisfied) verdict."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .models import JacobiParams
from .recurrence import (
    eval_solution,
    log_kernel_diagonal,
    monodromy,
    transfer_log_norms,
)
from .spectra import ZeroSet, christoffel_numbers, zeros

__all__ = [
    "BoundReport",
    "KernelMatrixStats",
    "InterlaceReport",
    "GrowthProfile",
    "BoundError",
    "a_operator_hs",
    "kernel_matrix",
    "spacing_lower_bound",
    "tunneling_bound",
    "multiplicity_bound",
    "discriminant",
    "discriminant_zeros",
    "interlace_check",
    "rotation_derivative_check",
    "spacing_upper_bound",
    "prufer_spacing_bounds",
    "quadrature_gap_bound",
    "kernel_gap_bound",
    "kernel_spacing_lower",
    "transfer_growth_profile",
    "concavity_check",
    "sup_on_interval",
    "bound_suite",
]

SLACK = 1e-12


class BoundError(ValueError):
    """Inputs outside the hypotheses of a bound."""


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


@dataclass(frozen=True)
class BoundReport:
    """``kind="lower"`` checks ``observed >= bound``; ``"upper"`` checks ``observed <= bound``."""

    name: str
    bound_value: float
    observed_value: float
    satisfied: bool
    context: dict = field(default_factory=dict)
    kind: str = "upper"

    @classmethod
    def make(cls, name, bound, observed, kind, **context):
        bound = float(bound)
        observed = float(observed)
        slack = SLACK * max(1.0, abs(bound)) if math.isfinite(bound) else 0.0
        if kind == "lower":
            ok = observed >= bound - slack
        elif kind == "upper":
            ok = observed <= bound + slack
        else:
            raise ValueError(kind)
        return cls(name, bound, observed, bool(ok), context, kind)

    def to_dict(self) -> dict:
        return _jsonable({
            "name": self.name,
            "bound": self.bound_value,
            "observed": self.observed_value,
            "satisfied": self.satisfied,
            "kind": self.kind,
            "context": self.context,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# Hilbert-Schmidt norm of the variation-of-parameters operator


@dataclass(frozen=True)
class KernelMatrixStats:
    """``hs_norm`` of ``A_L(E0)`` with the trace norms it is built from.

    ``solution_norms = (||u(0)||, ||u(pi/2)||, <u(0), u(pi/2)>)`` over indices
    ``1..L``; entries overflow to ``inf`` for strongly growing solutions, in
    which case ``log_hs_norm`` remains finite.
    """

    hs_norm: float
    L: int
    E0: float
    solution_norms: tuple
    log_hs_norm: float
    method: str


def kernel_matrix(params: JacobiParams, L: int, E0: float) -> np.ndarray:
    """Matrix of ``A_L(E0)``: ``K(n, m) = u_n(0) u_m(pi/2) - u_n(pi/2) u_m(0)`` for ``m <= n``."""
    f = eval_solution(params, 0.0, E0, L, logscale=False).values[1:]
    g = eval_solution(params, 0.5 * math.pi, E0, L, logscale=False).values[1:]
    return np.tril(np.outer(f, g) - np.outer(g, f))


def _hs_by_rows(a, b, L, E0):
    """``log sum_{n<m} K(n,m)^2`` propagating every row ``K(n, .)`` forward in ``m``.

    Each row is a fresh solution started at ``n`` with ``K(n,n) = 0`` and
    ``K(n,n+1) = -1/a_n``, so no cancellation between growing solutions occurs.
    """
    prev = np.zeros(L)
    cur = np.zeros(L)
    acc = 0.0
    s = 0  # stored value * 2**s is the true value
    for m in range(1, L):
        # rows n < m propagate from (K(n,m-1), K(n,m)) to K(n,m+1)
        am = a[m - 1]
        ap = a[m - 2] if m >= 2 else 1.0
        nxt = ((E0 - b[m - 1]) * cur - ap * prev) / am
        nxt[m - 1] = -math.ldexp(1.0 / am, -s)
        prev, cur = cur, nxt
        acc += float(cur[:m] @ cur[:m])
        big = float(np.max(np.abs(cur[:m])))
        if big > 2.0**400:
            prev = prev * 2.0**-400
            cur = cur * 2.0**-400
            acc *= 2.0**-800
            s += 400
    if acc == 0.0:
        return -math.inf
    return math.log(acc) + 2 * s * math.log(2.0)


def a_operator_hs(params: JacobiParams, L: int, E0: float) -> KernelMatrixStats:
    """``||A_L(E0)||_HS`` from ``||u(0)||^2 ||u(pi/2)||^2 - <u(0), u(pi/2)>^2``.

    When that difference cancels badly (both solutions dominated by one growing
    mode) the value is recomputed as ``sum_{n<m} K(n,m)^2`` from forward-propagated
    rows, which is exact up to rounding.
    """
    if L < 1:
        raise ValueError("L must be positive")
    if L == 1:
        return KernelMatrixStats(0.0, 1, float(E0), (1.0, 0.0, 0.0), -math.inf, "trivial")
    uf = eval_solution(params, 0.0, E0, L)
    ug = eval_solution(params, 0.5 * math.pi, E0, L)
    with np.errstate(over="ignore", invalid="ignore"):
        f = uf.unscaled()[1:]
        g = ug.unscaled()[1:]
        nf = float(f @ f)
        ng = float(g @ g)
        ip = float(f @ g)
        hs2 = nf * ng - ip * ip
    norms = (math.sqrt(nf), math.sqrt(ng), ip)
    if math.isfinite(hs2) and nf * ng > 0 and hs2 > 1e-6 * nf * ng:
        return KernelMatrixStats(math.sqrt(hs2), L, float(E0), norms, 0.5 * math.log(hs2), "traces")
    a, b = params.coeffs(L)
    log_hs2 = _hs_by_rows(a, b, L, float(E0))
    log_hs = 0.5 * log_hs2
    hs = math.exp(log_hs) if log_hs < 700 else math.inf
    return KernelMatrixStats(hs, L, float(E0), norms, log_hs, "rows")


def _straddle(z: np.ndarray, E0: float):
    if E0 < z[0] or E0 >= z[-1]:
        raise BoundError("E0 outside the convex hull of zeros (no straddling pair)")
    i = int(np.searchsorted(z, E0, side="right"))
    return z[i - 1], z[i]


def spacing_lower_bound(params: JacobiParams, L: int, E0: float, zs: ZeroSet | None = None) -> BoundReport:
    """Straddling gap at ``E0`` against ``(1/sqrt 2) ||A_L(E0)||_HS^{-1}``."""
    if L < 2:
        raise BoundError("L must be at least 2")
    zs = zs or zeros(params, L)
    lo, hi = _straddle(zs.zeros, E0)
    st = a_operator_hs(params, L, E0)
    bound = math.exp(-st.log_hs_norm - 0.5 * math.log(2.0))
    return BoundReport.make("hs_spacing_lower", bound, hi - lo, "lower", L=L, E0=E0,
                            straddle=(lo, hi), hs_norm=st.hs_norm, log_hs_norm=st.log_hs_norm,
                            hs_method=st.method)


def tunneling_bound(params: JacobiParams, L: int, zs: ZeroSet | None = None) -> BoundReport:
    """Minimum gap of ``J_L`` against ``(gamma^2 - 1)/(gamma^{2L} - 1)``."""
    if L < 2:
        raise BoundError("L must be at least 2")
    a, b = params.coeffs(L)
    am, ap = float(a.min()), float(a.max())
    beta = float(b.max() - b.min())
    gamma = abs((beta + 2 * ap) ** 2 + ap * ap + 1.0) ** 0.5 / am
    lg = math.log(gamma)
    log_den = 2 * L * lg + math.log1p(-math.exp(-2 * L * lg))
    bound = math.exp(math.log(gamma * gamma - 1.0) - log_den)
    zs = zs or zeros(params, L)
    return BoundReport.make("tunneling", bound, float(np.min(np.diff(zs.zeros))), "lower",
                            L=L, gamma=gamma)


def multiplicity_bound(params: JacobiParams, L: int, E0: float, count: int,
                       zs: ZeroSet | None = None) -> BoundReport:
    """Radius holding ``count`` zeros around ``E0`` against ``(1/2) ||A_L||_HS^{-1} sqrt(count)``."""
    if count < 2:
        raise BoundError("count must be at least 2")
    if count > L:
        raise BoundError("count exceeds the number of zeros")
    zs = zs or zeros(params, L)
    radius = float(np.sort(np.abs(zs.zeros - E0))[count - 1])
    st = a_operator_hs(params, L, E0)
    bound = 0.5 * math.sqrt(count) * math.exp(-st.log_hs_norm)
    return BoundReport.make("hs_multiplicity", bound, radius, "lower", L=L, E0=E0, count=count,
                            hs_norm=st.hs_norm)


# ---------------------------------------------------------------------------
# periodic discriminant


def discriminant(params: JacobiParams, n: int, E):
    """``Delta_n(E)``: trace of the one-period transfer matrix of the period-``n`` repetition."""
    M = monodromy(params, n, E)
    tr = M[:, 0, 0] + M[:, 1, 1]
    return float(tr[0]) if np.ndim(E) == 0 else tr


def _floquet_matrix(a, b, n, phase):
    H = np.diag(b.astype(complex))
    for k in range(n - 1):
        H[k, k + 1] += a[k]
        H[k + 1, k] += a[k]
    if n == 1:
        H[0, 0] += 2 * a[0] * math.cos(phase)
    else:
        H[0, n - 1] += a[n - 1] * np.exp(-1j * phase)
        H[n - 1, 0] += a[n - 1] * np.exp(1j * phase)
    return H


def discriminant_zeros(params: JacobiParams, n: int) -> np.ndarray:
    """The ``n`` zeros of ``Delta_n`` (one per band), sorted.

    Located as the Floquet eigenvalues at quasi-momentum ``pi/2`` and polished
    by bisection on the sign of ``Delta_n`` where a sign change brackets them.
    """
    a, b = params.coeffs(n)
    ev = np.sort(np.linalg.eigvalsh(_floquet_matrix(a, b, n, 0.5 * math.pi)))
    glo, ghi = params.gershgorin(n)
    h = 1e-9 * max(ghi - glo, 1.0)
    lo, hi = ev - h, ev + h
    with np.errstate(over="ignore", invalid="ignore"):
        flo = discriminant(params, n, lo)
        fhi = discriminant(params, n, hi)
        ok = np.isfinite(flo) & np.isfinite(fhi) & (np.sign(flo) * np.sign(fhi) < 0)
        for _ in range(40):
            if not np.any(ok):
                break
            mid = 0.5 * (lo + hi)
            fm = discriminant(params, n, mid)
            left = np.sign(fm) == np.sign(flo)
            lo = np.where(ok & left, mid, lo)
            flo = np.where(ok & left, fm, flo)
            hi = np.where(ok & ~left, mid, hi)
    return np.where(ok, 0.5 * (lo + hi), ev)


@dataclass(frozen=True)
class InterlaceReport:
    ok: bool
    closed_gaps: tuple
    disc_zeros: np.ndarray
    poly_zeros: np.ndarray

    def __bool__(self):
        return self.ok


def interlace_check(params: JacobiParams, n: int) -> InterlaceReport:
    """Do the ``n-1`` zeros of ``p_{n-1}`` separate the ``n`` zeros of ``Delta_n``?

    Zeros of ``p_{n-1}`` sitting where ``|Delta_n| = 2`` with vanishing slope
    (closed gaps) are reported in ``closed_gaps``.
    """
    d = discriminant_zeros(params, n)
    if n == 1:
        return InterlaceReport(True, (), d, np.empty(0))
    y = zeros(params, n - 1).zeros
    ok = bool(np.all(d[:-1] < y) and np.all(y < d[1:]))
    glo, ghi = params.gershgorin(n)
    h = 1e-7 * max(ghi - glo, 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        dv = discriminant(params, n, y)
        dd = (discriminant(params, n, y + h) - discriminant(params, n, y - h)) / (2 * h)
    closed = tuple(int(i) for i in np.nonzero((np.abs(np.abs(dv) - 2) < 1e-8) & (np.abs(dd) < 1e-4 * (1 + np.abs(dd).max())))[0])
    return InterlaceReport(ok, closed, d, y)


def _discriminant_slope(params: JacobiParams, n: int, E) -> np.ndarray:
    """``Delta_n'(E)`` by carrying ``dM/dE`` through the one-period product."""
    E = np.atleast_1d(np.asarray(E, dtype=np.float64))
    a, b = params.coeffs(n)
    M = np.broadcast_to(np.eye(2), (E.size, 2, 2)).copy()
    dM = np.zeros_like(M)
    for k in range(1, n + 1):
        ap = a[n - 1] if k == 1 else a[k - 2]
        S = np.zeros((E.size, 2, 2))
        S[:, 0, 0] = (E - b[k - 1]) / a[k - 1]
        S[:, 0, 1] = -ap / a[k - 1]
        S[:, 1, 0] = 1.0
        dM = S @ dM
        dM[:, 0, :] += M[:, 0, :] / a[k - 1]
        M = S @ M
    return dM[:, 0, 0] + dM[:, 1, 1]


def rotation_derivative_check(params: JacobiParams, n: int) -> BoundReport:
    """``min |Delta_n'|`` over the zeros of ``Delta_n`` against ``n (prod a_j)^{-1/n}``."""
    a, _ = params.coeffs(n)
    d = discriminant_zeros(params, n)
    der = _discriminant_slope(params, n, d)
    gm = math.exp(float(np.mean(np.log(a))))
    return BoundReport.make("discriminant_slope", n / gm, float(np.min(np.abs(der))), "lower", n=n)


# ---------------------------------------------------------------------------
# grid suprema


def sup_on_interval(fn, lo: float, hi: float, points: int, refine: int = 8) -> tuple[float, float]:
    """Sampled supremum of a vectorized ``fn`` on ``[lo, hi]``.

    Chebyshev-spaced grid followed by two rounds of local dense resampling
    around the ``refine`` largest local maxima.  Returns ``(value, argmax)``.
    """
    if hi <= lo:
        x = np.array([lo])
        v = fn(x)
        return float(v[0]), float(lo)
    k = np.arange(points)
    x = 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos(np.pi * k / (points - 1))
    v = fn(x)
    best = int(np.argmax(v))
    val, arg = float(v[best]), float(x[best])
    interior = np.nonzero((v[1:-1] >= v[:-2]) & (v[1:-1] >= v[2:]))[0] + 1
    cand = np.concatenate((interior, [0, points - 1]))
    cand = cand[np.argsort(v[cand])[::-1][:refine]]
    for i in cand:
        a_, b_ = x[max(i - 1, 0)], x[min(i + 1, points - 1)]
        for _ in range(2):
            xs = np.linspace(a_, b_, 33)
            vs = fn(xs)
            j = int(np.argmax(vs))
            if vs[j] > val:
                val, arg = float(vs[j]), float(xs[j])
            step = (b_ - a_) / 32
            a_, b_ = max(xs[j] - step, lo), min(xs[j] + step, hi)
    return val, arg


def _gaps_in(z: np.ndarray, lo: float, hi: float):
    inside = np.nonzero((z >= lo) & (z <= hi))[0]
    return inside


def spacing_upper_bound(params: JacobiParams, n: int, interval, zs: ZeroSet | None = None,
                        grid_factor: int = 64) -> BoundReport:
    """Largest successive gap of ``p_n`` zeros in ``interval`` against the
    discriminant bound ``8e sup||M|| (prod a_j)^{1/m} / m`` with ``m = n + 1``.

    The zeros of ``p_n`` interlace with those of the period-``(n+1)`` discriminant,
    whose one-period matrix ``M`` (with ``a_0 := a_{n+1}``) is unimodular.  The
    supremum runs over the interval extended to the discriminant zeros that
    bracket each gap, since the critical points used in the estimate lie there.
    """
    lo, hi = map(float, interval)
    if not hi > lo:
        raise BoundError("interval must have positive length")
    if n < 2:
        raise BoundError("n must be at least 2")
    zs = zs or zeros(params, n)
    idx = _gaps_in(zs.zeros, lo, hi)
    if idx.size < 2:
        raise BoundError("interval too small: fewer than 2 zeros")
    z = zs.zeros
    gaps = np.diff(z[idx])
    m = n + 1
    a, _ = params.coeffs(m)
    d = discriminant_zeros(params, m)
    # Delta zeros d_i < z_i < d_{i+1}; a gap (z_i, z_{i+1}) lies inside (d_i, d_{i+2})
    e_lo = min(lo, float(d[idx[0]]))
    e_hi = max(hi, float(d[min(idx[-1] + 1, m - 1)]))
    a0 = float(a[m - 1])

    def lognorm(E):
        with np.errstate(over="ignore", invalid="ignore"):
            return transfer_log_norms(params, m, E, a0=a0)

    log_sup, arg = sup_on_interval(lognorm, e_lo, e_hi, grid_factor * n)
    log_gm = float(np.mean(np.log(a)))
    log_bound = math.log(8 * math.e) + log_sup + log_gm - math.log(m)
    bound = math.exp(log_bound) if log_bound < 700 else math.inf
    return BoundReport.make("discriminant_spacing_upper", bound, float(gaps.max()), "upper",
                            n=n, interval=(lo, hi), sup_interval=(e_lo, e_hi), sup_log_norm=log_sup,
                            sup_at=arg, grid_points=grid_factor * n)


def _tau(params: JacobiParams, n: int, lo: float, hi: float, points: int) -> float:
    """``sup_{E, 0<=j<n} (1 + a_{j+1}^2) ||T_j(E)||^2`` (log), ``T_j`` mapping ``(p_0, p_{-1})`` to ``(p_{j+1}, p_j)``."""
    a, _ = params.coeffs(n)
    w = np.log1p(a * a)[:, None]

    def f(E):
        with np.errstate(over="ignore", invalid="ignore"):
            L = transfer_log_norms(params, n, E, every=True)
        return np.max(w + 2 * L, axis=0)

    val, _ = sup_on_interval(f, lo, hi, points)
    return val


def prufer_spacing_bounds(params: JacobiParams, n: int, interval, zs: ZeroSet | None = None,
                          points: int = 512) -> tuple[BoundReport, BoundReport]:
    """Min and max successive gaps in ``interval`` against ``a_n pi/(tau^2 n)`` and ``2 a_n pi tau^2/n``."""
    lo, hi = map(float, interval)
    zs = zs or zeros(params, n)
    idx = _gaps_in(zs.zeros, lo, hi)
    if idx.size < 2:
        raise BoundError("interval too small: fewer than 2 zeros")
    gaps = np.diff(zs.zeros[idx])
    log_tau = _tau(params, n, lo, hi, points)
    an = params.a(n)
    with np.errstate(over="ignore", under="ignore"):
        lower = an * math.pi / n * math.exp(-2 * log_tau) if log_tau < 350 else 0.0
        upper = 2 * an * math.pi / n * math.exp(2 * log_tau) if log_tau < 350 else math.inf
    # endpoint assertion: a zero within the upper bound of each end
    edge = None
    if hi - lo >= upper:
        z = zs.zeros
        edge = bool(np.any((z >= hi - upper) & (z <= hi)) and np.any((z >= lo) & (z <= lo + upper)))
    ctx = dict(n=n, interval=(lo, hi), log_tau=log_tau, endpoint_zeros=edge)
    return (
        BoundReport.make("prufer_spacing_lower", lower, float(gaps.min()), "lower", **ctx),
        BoundReport.make("prufer_spacing_upper", upper, float(gaps.max()), "upper", **ctx),
    )


# ---------------------------------------------------------------------------
# quadrature and kernel bounds


def _gauss_mass(params, c, d, N):
    """``mu_N([c, d])`` and its Chebyshev-Markov-Stieltjes upper estimate for
    ``mu``, from the ``N``-point Gauss rule ``mu_N``.

    With nodes ``y_1 < ... < y_N``, ``mu([y_i, y_l]) <= sum_{k=i}^{l} w_k``;
    the upper estimate takes ``y_i <= c`` and ``y_l >= d``.
    """
    q = christoffel_numbers(params, N)
    y, w = q.nodes, q.weights
    inside = float(np.sum(w[(y >= c) & (y <= d)]))
    i = max(int(np.searchsorted(y, c, side="right")) - 1, 0)
    l = min(int(np.searchsorted(y, d, side="left")), N - 1)
    return inside, float(np.sum(w[i : l + 1]))


def quadrature_gap_bound(params: JacobiParams, n: int, j: int, method: str = "auto",
                         zs: ZeroSet | None = None) -> BoundReport:
    """``mu([x_j, x_{j+1}]) <= lambda_j + lambda_{j+1}`` (``j`` is 1-based).

    ``method="integrate"`` integrates the weight numerically and needs a
    weight-driven model.  ``"gauss"`` measures the interval with the ``4n``-point
    Gauss rule instead; that discrete measure shares ``p_0 .. p_n`` and the
    ``lambda_j`` with ``mu``, so the inequality applies to it verbatim.  The
    context keeps the Chebyshev-Markov-Stieltjes upper estimate for ``mu`` and,
    for weight-driven models, the local envelope ``w_+ pi max d / m`` with
    ``m = n // 2``.
    """
    if not 1 <= j <= n - 1:
        raise BoundError("gap index must satisfy 1 <= j <= n-1")
    zs = zs or zeros(params, n)
    qd = christoffel_numbers(params, n, zs)
    x, lam = qd.nodes, qd.weights
    c, d = float(x[j - 1]), float(x[j])
    if method == "auto":
        method = "integrate" if params.weight is not None else "gauss"
    ctx = dict(n=n, j=j, gap=(c, d), method=method)
    if method == "integrate":
        if params.weight is None or params.support is None:
            raise BoundError("measure not integrable numerically")
        s_lo, s_hi = params.support
        lo, hi = max(c, s_lo), min(d, s_hi)
        mu = 0.0
        if hi > lo:
            pts = [p for p in params.breakpoints if lo < p < hi] or None
            mu, _ = quad(params.weight, lo, hi, points=pts, epsabs=1e-13, epsrel=1e-10, limit=200)
            mu /= params.mass
        # local envelope for the Christoffel numbers
        width = s_hi - s_lo
        delta = 0.05 * width
        i_lo, i_hi = max(c - delta, s_lo), min(d + delta, s_hi)
        grid = np.linspace(i_lo, i_hi, 257)
        w_plus = float(np.max(params.weight(grid))) / params.mass
        d_max = float(np.max(np.maximum(s_hi - grid, grid - s_lo)))
        ctx["weight_envelope"] = w_plus * math.pi * d_max / max(n // 2, 1)
        ctx["lambda_j"] = float(lam[j - 1])
    elif method == "gauss":
        mu, ctx["cms_upper"] = _gauss_mass(params, c, d, 4 * n)
    else:
        raise ValueError(f"unknown method {method!r}")
    return BoundReport.make("quadrature_gap", float(lam[j - 1] + lam[j]), mu, "upper", **ctx)


def _support_width(params: JacobiParams, n: int) -> tuple[float, str]:
    if params.support is not None:
        return float(params.support[1] - params.support[0]), "support"
    lo, hi = params.gershgorin(n)
    return hi - lo, "gershgorin"


def _check_successive(zs: ZeroSet, E: float, Ep: float) -> tuple[float, float]:
    E, Ep = sorted((float(E), float(Ep)))
    z = zs.zeros
    i = int(np.argmin(np.abs(z - E)))
    tol = max(zs.tol, 1e-12) * 8
    if abs(z[i] - E) > tol or i + 1 >= z.size or abs(z[i + 1] - Ep) > tol:
        raise BoundError("energies are not successive zeros of p_n")
    return E, Ep


def kernel_gap_bound(params: JacobiParams, n: int, gap, p: int, q: int,
                     zs: ZeroSet | None = None) -> BoundReport:
    """``|E - E'| <= (a/p) K_N(mid, mid)^{1/2q}`` with ``N = (2p-2) q``.

    The trial polynomial is the ``q``-th power of a Dirichlet polynomial of
    degree ``2p-2``; ``a`` is the support width (Gershgorin width of ``J_n`` when
    the support is unknown, which still dominates every zero separation).
    """
    if p < 1 or q < 1:
        raise BoundError("p and q must be positive")
    if (2 * p - 2) ** (2 * q) > 2 * n - 1:
        raise BoundError("constraint (2p-2)^(2q) <= 2n-1 violated")
    zs = zs or zeros(params, n)
    E, Ep = _check_successive(zs, *gap)
    a, src = _support_width(params, n)
    N = (2 * p - 2) * q
    mid = 0.5 * (E + Ep)
    logK = float(log_kernel_diagonal(params, N, [mid])[0])
    bound = a / p * math.exp(logK / (2 * q))
    return BoundReport.make("kernel_gap_upper", bound, Ep - E, "upper", n=n, p=p, q=q,
                            kernel_degree=N, a=a, a_source=src, gap=(E, Ep))


def kernel_spacing_lower(params: JacobiParams, n: int, pair, delta: float,
                         points: int = 1024) -> BoundReport:
    """``|E - E'| >= [delta^2 - (|E-E'|/2)^2]/(3n) [K_n(E,E)/sup K_n(y,y)]^{1/2}``."""
    E, Ep = sorted(map(float, pair))
    g = Ep - E
    if g <= 0:
        raise BoundError("zeros must be distinct")
    if delta <= 0.5 * g:
        raise BoundError("delta too small: need delta > |E-E'|/2")
    mid = 0.5 * (E + Ep)
    def logK(y):
        return log_kernel_diagonal(params, n, y)

    log_sup, _ = sup_on_interval(logK, mid - delta, mid + delta, points)
    log_ratio = float(logK([E])[0]) - log_sup
    bound = (delta * delta - 0.25 * g * g) / (3 * n) * math.exp(0.5 * log_ratio)
    return BoundReport.make("kernel_spacing_lower", bound, g, "lower", n=n, pair=(E, Ep),
                            delta=delta, log_kernel_ratio=log_ratio)


# ---------------------------------------------------------------------------
# transfer growth and the concavity lemma


@dataclass(frozen=True)
class GrowthProfile:
    n: np.ndarray
    log_sup: np.ndarray
    slope_sqrt: float
    resid_sqrt: float
    slope_lin: float
    resid_lin: float
    regime: str


def transfer_growth_profile(params: JacobiParams, E: float, n_list) -> GrowthProfile:
    """Fit ``log sup_{m<=n} ||T(m,E)||`` against ``sqrt(n)`` and against ``n``."""
    ns = np.asarray(n_list, dtype=np.int64)
    if ns.size < 2 or np.any(np.diff(ns) <= 0):
        raise ValueError("n_list must be increasing")
    L = transfer_log_norms(params, int(ns[-1]), [E], every=True)[:, 0]
    run = np.maximum.accumulate(L)[ns - 1]

    def fit(X):
        A = np.vstack([X, np.ones_like(X)]).T
        coef, *_ = np.linalg.lstsq(A, run, rcond=None)
        r = float(np.sqrt(np.mean((A @ coef - run) ** 2)))
        return float(coef[0]), r

    s_sq, r_sq = fit(np.sqrt(ns.astype(float)))
    s_li, r_li = fit(ns.astype(float))
    if float(run.max() - run.min()) < 0.5:
        regime = "bounded"
    elif r_sq <= r_li + 1e-12 * max(1.0, float(np.abs(run).max())):
        regime = "sqrt"
    else:
        regime = "linear"
    return GrowthProfile(ns, run, s_sq, r_sq, s_li, r_li, regime)


def concavity_check(roots) -> list[BoundReport]:
    """For a real-rooted ``Q``, check ``|E1 - E0| <= e |Q(E1)| / |Q'(E0)|`` for every
    zero ``E0`` and the adjacent critical point ``E1`` on either side."""
    roots = np.sort(np.asarray(roots, dtype=np.float64))
    Q = np.poly1d(np.poly(roots))
    dQ = Q.deriv()
    crit = np.sort(np.real(dQ.roots))
    out = []
    for r0 in np.unique(roots):
        for side in (-1, 1):
            cand = crit[crit > r0] if side > 0 else crit[crit < r0]
            if cand.size == 0:
                continue
            e1 = float(cand.min() if side > 0 else cand.max())
            # Q must not vanish between the zero and the critical point
            between = roots[(roots - r0) * side > 0]
            if between.size and (between.min() if side > 0 else between.max()) * side < e1 * side:
                continue
            d0 = abs(dQ(r0))
            if d0 == 0:
                continue
            out.append(BoundReport.make("concavity", math.e * abs(Q(e1)) / d0, abs(e1 - r0), "upper",
                                        E0=float(r0), E1=e1))
    return out


# ---------------------------------------------------------------------------
# one-shot suite


def _kernel_p(n: int) -> int:
    """Largest ``p`` with ``(2p - 2)^2 <= 2n - 1``."""
    return int(math.isqrt(2 * n - 1)) // 2 + 1


def bound_suite(params: JacobiParams, n: int, E0: float, zs: ZeroSet | None = None,
                window: int = 2) -> list[BoundReport]:
    """Every unconditional check at degree ``n`` around ``E0``.

    ``E0`` must lie strictly inside the hull of the zeros; the local interval
    spans ``window`` zeros on each side of the straddling pair.
    """
    if n < 3:
        raise BoundError("n must be at least 3")
    zs = zs or zeros(params, n)
    z = zs.zeros
    lo, hi = _straddle(z, E0)
    i = int(np.searchsorted(z, E0, side="right"))  # z[i-1] <= E0 < z[i]
    interval = (float(z[max(i - 1 - window, 0)]), float(z[min(i + window, n - 1)]))
    out = [
        spacing_lower_bound(params, n, E0, zs),
        tunneling_bound(params, n, zs),
        multiplicity_bound(params, n, E0, 3, zs),
        spacing_upper_bound(params, n, interval, zs),
        *prufer_spacing_bounds(params, n, interval, zs),
        quadrature_gap_bound(params, n, i, zs=zs),
        kernel_gap_bound(params, n, (lo, hi), _kernel_p(n), 1, zs),
        kernel_spacing_lower(params, n, (lo, hi), hi - lo),
    ]
    return out
