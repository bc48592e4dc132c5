"""Szegő recursion, paraorthogonal polynomials and their zeros on the unit circle."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .models import VerblunskyParams

__all__ = [
    "SzegoPair",
    "CircleZeroSet",
    "EtaBranch",
    "PopucError",
    "szego_recursion",
    "szego_table",
    "popuc_eval",
    "eta_phase",
    "eta_derivative",
    "popuc_zeros",
    "circle_clock_deviation",
    "paraorthogonality_residual",
    "circle_interlace",
    "write_circle_csv",
]

TWO_PI = 2.0 * math.pi
# additive constant in the level condition eta = arg(conj(beta)) + offset (mod 2 pi),
# fixed against alpha = 0 where the zeros solve z^n = conj(beta)
LEVEL_OFFSET = 0.0
_RENORM_EVERY = 64
_UNRESOLVED = 1e-14
_START = -0.5 * (math.sqrt(5.0) - 1.0) * 1e-3


class PopucError(ValueError):
    pass


@dataclass(frozen=True)
class SzegoPair:
    phi: np.ndarray | complex
    phistar: np.ndarray | complex
    n: int
    z: np.ndarray | complex


@dataclass(frozen=True)
class CircleZeroSet:
    n: int
    beta: complex
    angles: np.ndarray

    def points(self) -> np.ndarray:
        return np.exp(1j * self.angles)


@dataclass(frozen=True)
class EtaBranch:
    grid: np.ndarray
    eta: np.ndarray
    derivative: np.ndarray
    winding: float
    refined_points: int


def _check_z(z):
    z = np.asarray(z, dtype=np.complex128)
    if np.any(np.abs(z) > 1.0 + 1e-12):
        raise PopucError("z must lie in the closed unit disk")
    return z


def _rho(al):
    return np.sqrt((1.0 - np.abs(al)) * (1.0 + np.abs(al)))


def _scaled(alpha: VerblunskyParams, n: int, z):
    """``(phi_n, phi_n^*, log_scale)`` with periodic renormalization by ``|phi^*|``."""
    al = alpha.values(n)
    rho = _rho(al)
    phi = np.ones(z.shape, dtype=np.complex128)
    ps = np.ones(z.shape, dtype=np.complex128)
    logs = np.zeros(z.shape)
    for k in range(n):
        zp = z * phi
        phi, ps = (zp - np.conj(al[k]) * ps) / rho[k], (ps - al[k] * zp) / rho[k]
        if (k + 1) % _RENORM_EVERY == 0:
            s = np.abs(ps)
            phi /= s
            ps /= s
            logs += np.log(s)
    return phi, ps, logs


def szego_recursion(alpha: VerblunskyParams, n: int, z) -> SzegoPair:
    """``phi_n(z)`` and ``phi_n^*(z)`` by the Szegő recursion."""
    if n < 0:
        raise PopucError("n must be non-negative")
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(_check_z(z))
    phi, ps, logs = _scaled(alpha, n, zz)
    f = np.exp(logs)
    phi, ps = phi * f, ps * f
    if scalar:
        return SzegoPair(complex(phi[0]), complex(ps[0]), n, complex(zz[0]))
    return SzegoPair(phi, ps, n, zz)


def szego_table(alpha: VerblunskyParams, n: int, z) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``phi_0 .. phi_n`` and ``phi_0^* .. phi_n^*`` at the points ``z``."""
    zz = np.atleast_1d(_check_z(z))
    al = alpha.values(n)
    rho = _rho(al)
    phi = np.empty((n + 1, zz.size), dtype=np.complex128)
    ps = np.empty_like(phi)
    phi[0] = 1.0
    ps[0] = 1.0
    for k in range(n):
        zp = zz * phi[k]
        phi[k + 1] = (zp - np.conj(al[k]) * ps[k]) / rho[k]
        ps[k + 1] = (ps[k] - al[k] * zp) / rho[k]
    return phi, ps


def _check_beta(beta) -> complex:
    beta = complex(beta)
    if abs(abs(beta) - 1.0) > 1e-12:
        raise PopucError(f"|beta| = {abs(beta)!r} is not 1")
    return beta


def popuc_eval(alpha: VerblunskyParams, beta, n: int, z):
    """``z phi_{n-1}(z) - conj(beta) phi_{n-1}^*(z)``."""
    beta = _check_beta(beta)
    if n < 1:
        raise PopucError("n must be at least 1")
    pair = szego_recursion(alpha, n - 1, z)
    return pair.z * pair.phi - np.conj(beta) * pair.phistar


def _wrapped_eta(alpha, n, theta):
    """``arg(e^{i theta} phi_{n-1} / phi_{n-1}^*)`` in ``(-pi, pi]``."""
    z = np.exp(1j * np.asarray(theta, dtype=np.float64))
    phi, ps, _ = _scaled(alpha, n - 1, np.atleast_1d(z))
    return np.angle(z * phi / ps)


def eta_derivative(alpha: VerblunskyParams, n: int, theta) -> np.ndarray:
    """``sum_{j<n} |phi_j|^2 / |phi_{n-1}|^2`` on the circle."""
    z = np.exp(1j * np.atleast_1d(np.asarray(theta, dtype=np.float64)))
    phi, _ = szego_table(alpha, n - 1, z)
    mag = np.abs(phi) ** 2
    return np.sum(mag, axis=0) / mag[-1]


def _increment(prev, new):
    """Wrapped phase step ``new - prev`` mapped into ``[-pi, pi)``."""
    return (new - prev + math.pi) % TWO_PI - math.pi


def eta_phase(alpha: VerblunskyParams, n: int, theta_grid, max_depth: int = 60,
              step_cap: float = 0.5 * math.pi) -> EtaBranch:
    """Continuous increasing branch of ``eta_n`` on ``theta_grid``.

    A cell is bisected until its wrapped increment lies in ``[0, step_cap]``
    and the larger endpoint derivative predicts no more than ``step_cap``.
    ``winding`` is the total increase over one full turn from ``theta_grid[0]``.
    """
    if n < 1:
        raise PopucError("n must be at least 1")
    grid = np.asarray(theta_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
        raise PopucError("theta grid must be strictly increasing")
    full = np.append(grid, grid[0] + TWO_PI)
    pts, eta, idx = _unwrap(alpha, n, full, max_depth, step_cap)
    deriv = eta_derivative(alpha, n, grid)
    turn = _circle_grid(max(8 * n, 64))
    _, around, _ = _unwrap(alpha, n, turn, max_depth, step_cap)
    return EtaBranch(grid, eta[idx[:-1]], deriv, float(around[-1] - around[0]), pts.size - full.size)


def _circle_grid(m):
    """One full turn started just below 0, with 0 and pi as interior nodes.

    Real coefficient sequences put any mass points at 0 or pi; a jump of
    nearly 2 pi there is invisible to sampling unless the point is a node.
    """
    g = _START + np.linspace(0.0, TWO_PI, m + 1)
    return np.unique(np.concatenate([g, [0.0, math.pi]]))


def _unwrap(alpha, n, grid, max_depth, step_cap):
    """Unwrap ``eta_n`` along ``grid`` with adaptive bisection.

    Returns the refined points, the branch there, and the positions of the
    original grid points inside the refined list.
    """
    raw = _wrapped_eta(alpha, n, grid)
    der = eta_derivative(alpha, n, grid)
    pts = [grid[0]]
    vals = [raw[0]]
    idx = [0]
    for i in range(grid.size - 1):
        stack = [(grid[i], grid[i + 1], raw[i], raw[i + 1], der[i], der[i + 1], 0)]
        # depth-first, left to right
        while stack:
            lo, hi, rl, rh, dl, dh, depth = stack.pop()
            step = _increment(rl, rh)
            if 0.0 <= step <= step_cap and max(dl, dh) * (hi - lo) <= step_cap:
                pts.append(hi)
                vals.append(vals[-1] + step)
                continue
            if hi - lo <= _UNRESOLVED * max(1.0, abs(lo)):
                # a jump narrower than the angle resolution (a mass point on the
                # circle); the branch is increasing, so take the step mod 2 pi
                pts.append(hi)
                vals.append(vals[-1] + step % TWO_PI)
                continue
            if depth >= max_depth:
                raise PopucError(f"phase refinement cap exceeded near theta={lo!r}")
            mid = 0.5 * (lo + hi)
            rm = float(_wrapped_eta(alpha, n, [mid])[0])
            dm = float(eta_derivative(alpha, n, [mid])[0])
            stack.append((mid, hi, rm, rh, dm, dh, depth + 1))
            stack.append((lo, mid, rl, rm, dl, dm, depth + 1))
        idx.append(len(pts) - 1)
    return np.array(pts), np.array(vals), np.array(idx)


def popuc_zeros(alpha: VerblunskyParams, beta, n: int, tol: float = 1e-13,
                grid_factor: int = 8) -> CircleZeroSet:
    """All ``n`` zeros of the paraorthogonal polynomial, as angles in ``[0, 2 pi)``.

    Zeros sit where the increasing branch ``eta_n`` hits
    ``arg(conj(beta)) + LEVEL_OFFSET`` modulo ``2 pi``; each is isolated on a
    branch cell and bisected in angle.
    """
    beta = _check_beta(beta)
    if n < 1:
        raise PopucError("n must be at least 1")
    m = max(grid_factor * n, 64)
    grid, eta, _ = _unwrap(alpha, n, _circle_grid(m), 60, 0.5 * math.pi)
    turns = (eta[-1] - eta[0]) / TWO_PI
    if abs(turns - n) > 1e-6:
        raise PopucError(f"phase winding {turns!r} turns, expected {n}")
    level = math.atan2(-beta.imag, beta.real) + LEVEL_OFFSET
    first = eta[0] + (level - eta[0]) % TWO_PI
    targets = first + TWO_PI * np.arange(n)
    cell = np.clip(np.searchsorted(eta, targets, side="right") - 1, 0, grid.size - 2)
    lo = grid[cell].copy()
    hi = grid[cell + 1].copy()
    base = eta[cell]
    span = eta[cell + 1] - base
    raw_base = _wrapped_eta(alpha, n, lo)

    def bisect(sel, stop):
        for _ in range(400):
            act = sel[~stop(lo[sel], hi[sel])]
            if act.size == 0:
                return
            mid = 0.5 * (lo[act] + hi[act])
            inc = (_wrapped_eta(alpha, n, mid) - raw_base[act]) % TWO_PI
            # the branch rises by at most span[act] across the cell; anything
            # beyond the midpoint of the leftover is a rounding-negative step
            inc = np.where(inc > 0.5 * (span[act] + TWO_PI), inc - TWO_PI, inc)
            right = base[act] + inc >= targets[act]
            hi[act[right]] = mid[right]
            lo[act[~right]] = mid[~right]

    everyone = np.arange(n)
    bisect(everyone, lambda l, h: h - l <= tol)
    # zeros at nearly-invisible jumps (mass points) need full float resolution
    z = np.exp(1j * 0.5 * (lo + hi))
    pair = szego_recursion(alpha, n - 1, z)
    res = np.abs(z * pair.phi - np.conj(beta) * pair.phistar) / np.abs(pair.phistar)
    bisect(np.nonzero(res > 1e-12)[0],
           lambda l, h: (0.5 * (l + h) <= l) | (0.5 * (l + h) >= h))
    ang = np.mod(0.5 * (lo + hi), TWO_PI)
    ang = np.where(ang >= TWO_PI - tol, ang - TWO_PI, ang)
    ang = np.sort(np.maximum(ang, 0.0))
    return CircleZeroSet(n, beta, ang)


def circle_clock_deviation(czs: CircleZeroSet, arc) -> float:
    """``max |n * (theta_{k+1} - theta_k) - 2 pi|`` over successive zeros in ``arc``.

    ``arc = (start, end)`` with ``start < end``; arcs may pass through angle 0
    (e.g. ``(-pi/2, pi/2)``).
    """
    start, end = float(arc[0]), float(arc[1])
    if not end > start or end - start > TWO_PI:
        raise PopucError("arc must satisfy start < end <= start + 2 pi")
    rel = np.sort((czs.angles - start) % TWO_PI)
    inside = rel[rel <= end - start]
    if inside.size < 2:
        raise PopucError("fewer than two zeros in the arc")
    return float(np.max(np.abs(czs.n * np.diff(inside) - TWO_PI)))


def paraorthogonality_residual(alpha: VerblunskyParams, czs: CircleZeroSet) -> float:
    """Largest normalized ``|sum_{j<n} conj(phi_j(z1)) phi_j(z2)|`` over distinct zeros."""
    phi, _ = szego_table(alpha, czs.n - 1, czs.points())
    G = phi.conj().T @ phi
    d = np.sqrt(np.real(np.diag(G)))
    R = np.abs(G) / np.outer(d, d)
    np.fill_diagonal(R, 0.0)
    return float(R.max()) if czs.n > 1 else 0.0


def circle_interlace(first: CircleZeroSet, second: CircleZeroSet) -> bool:
    """Whether two zero sets of equal degree strictly alternate around the circle."""
    if first.n != second.n:
        return False
    tags = np.concatenate([np.zeros(first.n), np.ones(second.n)])
    ang = np.concatenate([first.angles, second.angles])
    order = np.argsort(ang, kind="stable")
    if np.any(np.diff(ang[order]) <= 0):
        return False
    t = tags[order]
    return bool(np.all(t[1:] != t[:-1]) and t[0] != t[-1])


def write_circle_csv(path, czs: CircleZeroSet, digits: int = 17):
    fmt = f"{{:.{digits}g}}"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "angle", "cos", "sin"])
        for k, t in enumerate(czs.angles, start=1):
            w.writerow([k, fmt.format(t), fmt.format(math.cos(t)), fmt.format(math.sin(t))])
