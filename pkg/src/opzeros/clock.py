"""Clock-behavior diagnostics, edge phase scans and spacing statistics."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .models import JacobiParams, ModelSpec, build_model, counter_uniform
from .recurrence import monodromy
from .spectra import ZeroSet, sturm_counts, zeros

__all__ = [
    "SpacingReport",
    "StatsSummary",
    "ClockError",
    "free_dos",
    "periodic_dos",
    "nearest_zeros",
    "clock_deviation",
    "strong_clock_profile",
    "edge_deltas",
    "edge_phase_scan",
    "straddle_pair",
    "straddling_cdf",
    "spacing_statistics",
    "write_histogram_csv",
]


class ClockError(ValueError):
    pass


def free_dos(E):
    """Density of states of ``a = 1, b = 0``: ``1/(pi sqrt(4 - E^2))`` on ``(-2, 2)``."""
    E = np.asarray(E, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(np.abs(E) < 2, 1.0 / (math.pi * np.sqrt(np.maximum(4 - E * E, 0.0))), 0.0)
    return out if out.ndim else float(out)


def periodic_dos(params: JacobiParams, p: int, E, h: float = 1e-6):
    """Density of states of the period-``p`` model from its discriminant,
    ``|Delta'| / (p pi sqrt(4 - Delta^2))`` inside the bands and 0 in gaps."""
    E = np.atleast_1d(np.asarray(E, dtype=np.float64))

    def disc(x):
        M = monodromy(params, p, x)
        return M[:, 0, 0] + M[:, 1, 1]

    D = disc(E)
    dD = (disc(E + h) - disc(E - h)) / (2 * h)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(np.abs(D) < 2, np.abs(dD) / (p * math.pi * np.sqrt(np.maximum(4 - D * D, 0.0))), 0.0)
    return out if out.size > 1 else float(out[0])


@dataclass(frozen=True)
class SpacingReport:
    """Zeros ``z^{(j)}`` nearest ``E0`` (``z^{(-1)} <= E0 < z^{(1)}``) and their scaled gaps."""

    E0: float
    n: int
    nearest: dict
    scaled_gaps: dict = field(default_factory=dict)
    deviation: float | None = None
    partial: bool = False
    dos_source: str | None = None

    def to_dict(self) -> dict:
        return {
            "E0": self.E0,
            "n": self.n,
            "nearest": {str(k): float(v) for k, v in self.nearest.items()},
            "scaled_gaps": {str(k): float(v) for k, v in self.scaled_gaps.items()},
            "deviation": self.deviation,
            "partial": self.partial,
            "dos_source": self.dos_source,
        }


def nearest_zeros(zs: ZeroSet, E0: float, j_max: int) -> SpacingReport:
    """Label zeros around ``E0``: ``... < z^{(-1)} <= E0 < z^{(1)} < z^{(2)} < ...``."""
    if j_max < 1:
        raise ClockError("j_max must be at least 1")
    z = zs.zeros
    if E0 < z[0] or E0 >= z[-1]:
        raise ClockError("E0 outside the convex hull of zeros")
    k = int(np.searchsorted(z, E0, side="right"))  # z[k-1] <= E0 < z[k]
    nearest = {}
    partial = False
    for j in range(1, j_max + 1):
        if k - j >= 0:
            nearest[-j] = float(z[k - j])
        else:
            partial = True
        if k + j - 1 < z.size:
            nearest[j] = float(z[k + j - 1])
        else:
            partial = True
    nearest = dict(sorted(nearest.items()))
    return SpacingReport(float(E0), zs.n, nearest, partial=partial)


def clock_deviation(zs: ZeroSet, interval, dos_derivative, relative: bool = False) -> float:
    """``sup |n (E' - E) - 1/nu'(mid)|`` over successive zeros in ``interval``.

    With ``relative=True`` returns ``sup |n (E' - E) nu'(mid) - 1|`` instead.
    """
    lo, hi = interval
    z = zs.zeros[(zs.zeros >= lo) & (zs.zeros <= hi)]
    if z.size < 2:
        raise ClockError("fewer than 2 zeros in the interval")
    mids = 0.5 * (z[1:] + z[:-1])
    rho = np.asarray(dos_derivative(mids), dtype=np.float64)
    if np.any(rho <= 0):
        raise ClockError("density of states must be positive on the interval")
    ng = zs.n * np.diff(z)
    if relative:
        return float(np.max(np.abs(ng * rho - 1.0)))
    return float(np.max(np.abs(ng - 1.0 / rho)))


def strong_clock_profile(params: JacobiParams, E0: float, n_list, j_max: int,
                         dos: float | None = None) -> dict:
    """For each ``n``, the scaled gaps ``n (z^{(j+1)} - z^{(j)}) nu'(E0)`` between
    consecutive labels ``-j_max .. -1, 1 .. j_max`` (the pair ``(-1, 1)`` straddles ``E0``).

    Without ``dos`` the density is estimated from the zeros of the largest ``n``.
    """
    ns = list(n_list)
    source = "given"
    if dos is None:
        from .spectra import dos_derivative

        dos = dos_derivative(zeros(params, max(ns)), E0).value
        source = "empirical"
    out = {}
    for n in ns:
        rep = nearest_zeros(zeros(params, n), E0, j_max)
        labels = sorted(rep.nearest)
        gaps = {}
        for l0, l1 in zip(labels[:-1], labels[1:]):
            gaps[l0] = n * (rep.nearest[l1] - rep.nearest[l0]) * dos
        out[n] = SpacingReport(rep.E0, n, rep.nearest, gaps, partial=rep.partial, dos_source=source)
    return out


# ---------------------------------------------------------------------------
# edge phases


def _edge_factor(a, b, n, edge):
    """``edge*I - J_n = L D L^T``; returns ``(D, L)`` or ``None`` if not positive definite."""
    d = np.empty(n)
    l = np.empty(max(n - 1, 0))
    d[0] = edge - b[0]
    if d[0] <= 0:
        return None
    for k in range(1, n):
        l[k - 1] = -a[k - 1] / d[k - 1]
        d[k] = (edge - b[k]) - a[k - 1] * a[k - 1] / d[k - 1]
        if d[k] <= 0:
            return None
    return d, l


def _qd_count(d, l, sigma):
    """Negative count of ``L D L^T - sigma I`` by the stationary qd transform (vectorized in sigma)."""
    sigma = np.atleast_1d(sigma)
    s = -sigma.copy()
    cnt = np.zeros(sigma.shape, dtype=np.int64)
    tiny = np.finfo(float).tiny
    for k in range(d.size - 1):
        dp = d[k] + s
        dp = np.where(dp == 0.0, -tiny, dp)
        cnt += dp < 0
        lp = l[k] * d[k] / dp
        s = lp * l[k] * s - sigma
    dp = d[-1] + s
    cnt += (dp < 0) | (dp == 0.0)
    return cnt


def edge_deltas(params: JacobiParams, n: int, count: int, edge: float = 2.0):
    """``edge - E_j`` for the ``count`` zeros nearest ``edge`` from below, to high
    relative accuracy, or ``None`` when ``edge I - J_n`` is not positive definite.

    Bisection runs on the LDL^T factorization of ``edge I - J_n`` using the
    stationary qd transform, which resolves small eigenvalues relative to their
    own size rather than to ``||J||``.
    """
    a, b = params.coeffs(n)
    fac = _edge_factor(a, b, n, edge)
    if fac is None:
        return None
    d, l = fac
    count = min(count, n)
    ks = np.arange(1, count + 1)
    hi = np.full(count, edge - params.gershgorin(n)[0] + 1.0)
    lo = np.zeros(count)
    for _ in range(2000):
        mid = np.where(lo > 0, np.sqrt(lo * hi), 0.5 * hi)
        done = (hi - lo) <= 2 * np.finfo(float).eps * hi
        if np.all(done):
            break
        c = _qd_count(d, l, mid)
        right = c >= ks
        hi = np.where(~done & right, mid, hi)
        lo = np.where(~done & ~right, mid, lo)
    return 0.5 * (lo + hi)


def edge_phase_scan(params: JacobiParams, n: int, j_max: int, zs: ZeroSet | None = None) -> dict:
    """``n theta_j`` with ``2 cos(theta_j) = E_j`` for the zeros nearest 2 from below.

    Returns ``{"phases": array, "partial": bool, "hint": "resonant" | "nonresonant"}``.
    """
    deltas = edge_deltas(params, n, j_max)
    if deltas is not None:
        delta = deltas[deltas < 2.0]
    else:
        zs = zs or zeros(params, n)
        z = zs.zeros[(zs.zeros > 0) & (zs.zeros < 2)][::-1][:j_max]
        delta = 2.0 - z
    theta = 2.0 * np.arcsin(np.sqrt(delta) / 2.0)
    phases = n * theta
    hint = None
    if phases.size:
        p1 = phases[0]
        hint = "resonant" if abs(p1 - 0.5 * math.pi) < abs(p1 - math.pi) else "nonresonant"
    return {"phases": phases, "partial": bool(phases.size < j_max), "hint": hint}


# ---------------------------------------------------------------------------
# spacing statistics


def straddle_pair(params: JacobiParams, n: int, E0: float, tol: float = 1e-12):
    """The zeros ``z^{(-1)} <= E0 < z^{(1)}`` of ``p_n`` by Sturm bisection alone.

    Returns ``None`` when ``E0`` lies outside the hull of zeros.
    """
    a, b = params.coeffs(n)
    glo, ghi = params.gershgorin(n)
    eps = np.finfo(float).tiny * (ghi - glo)
    # zeros <= E0 (counts are strict, so step just above E0)
    k = int(sturm_counts(a, b, n, [np.nextafter(E0, np.inf)], eps)[0])
    if k == 0 or k == n:
        return None
    ks = np.array([k, k + 1])
    lo = np.full(2, glo)
    hi = np.full(2, ghi)
    width = tol * (ghi - glo)
    for _ in range(200):
        if np.all(hi - lo <= width):
            break
        mid = 0.5 * (lo + hi)
        c = sturm_counts(a, b, n, mid, eps)
        right = c >= ks
        hi = np.where(right, mid, hi)
        lo = np.where(right, lo, mid)
    z = 0.5 * (lo + hi)
    return float(z[0]), float(z[1])


def straddling_cdf(x):
    """Gap straddling a fixed point in a unit-rate Poisson process: sum of two
    independent unit exponentials, ``1 - e^{-x}(1 + x)``."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, 1.0 - np.exp(-x) * (1.0 + x), 0.0)


@dataclass(frozen=True)
class StatsSummary:
    samples: int
    gap_histogram: tuple  # (bin_edges, counts); the last bin collects overflow
    ks_to_exponential: float
    min_scaled_gap: float
    scaled_gaps: np.ndarray
    dos_estimate: float

    def to_dict(self) -> dict:
        edges, counts = self.gap_histogram
        return {
            "samples": self.samples,
            "ks_to_poisson_straddle": self.ks_to_exponential,
            "min_scaled_gap": self.min_scaled_gap,
            "dos_estimate": self.dos_estimate,
            "histogram": {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]},
        }


HIST_EDGES = np.linspace(0.0, 8.0, 33)


def _trial_spec(spec: ModelSpec, master_seed: int, t: int) -> ModelSpec:
    p = dict(spec.params)
    if spec.variant == "IIDRandom":
        # independent stream per (master, trial); plain xor would let nearby
        # master seeds share realizations
        p["seed"] = int(np.random.SeedSequence([int(master_seed), t]).generate_state(1, np.uint64)[0])
    elif spec.variant == "AlmostMathieu":
        p["phase"] = 2 * math.pi * float(counter_uniform(master_seed, t + 1)[0])
    else:
        return spec
    return ModelSpec(spec.variant, p)


def _one_trial(args):
    spec, master_seed, t, E0, n, window = args
    params = build_model(_trial_spec(spec, master_seed, t))
    pair = straddle_pair(params, n, E0)
    a, b = params.coeffs(n)
    c = sturm_counts(a, b, n, [E0 - window, E0 + window])
    gap = None if pair is None else pair[1] - pair[0]
    return gap, int(c[1] - c[0])


def spacing_statistics(spec: ModelSpec, E0: float, n: int, trials: int, master_seed: int = 0,
                       window: float | None = None, threads: int = 1) -> StatsSummary:
    """Straddling-gap statistics at ``E0`` over independent realizations.

    IIDRandom trials use seed ``master ^ t``; AlmostMathieu trials draw the phase
    from the counter-based stream.  Gaps are scaled by ``n`` and by the density
    of states estimated from zero counts in ``[E0 - w, E0 + w]`` averaged over
    trials (``w = n^{-1/2}`` by default).  Trials are mapped over ``threads``
    worker processes; results are reduced in trial order.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if window is None:
        window = n ** -0.5
    jobs = [(spec, master_seed, t, E0, n, window) for t in range(trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_one_trial, jobs, chunksize=max(1, trials // (4 * threads))))
    else:
        results = [_one_trial(j) for j in jobs]
    raw = [g for g, _ in results if g is not None]
    counts = [c for _, c in results]
    dos = float(np.mean(counts)) / (2 * window * n)
    s = n * np.asarray(raw) * dos
    hist, _ = np.histogram(np.minimum(s, HIST_EDGES[-1] - 1e-12), bins=HIST_EDGES)
    ks = float(stats.kstest(s, straddling_cdf).statistic) if s.size else 1.0
    return StatsSummary(int(s.size), (HIST_EDGES, hist), ks, float(s.min()) if s.size else math.nan,
                        s, dos)


def write_histogram_csv(path, summary: StatsSummary, digits: int = 17):
    edges, counts = summary.gap_histogram
    centers = 0.5 * (edges[1:] + edges[:-1])
    mass = counts / max(summary.samples, 1)
    fmt = f"{{:.{digits}g}}"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_center", "mass"])
        for c, m in zip(centers, mass):
            w.writerow([fmt.format(c), fmt.format(m)])
