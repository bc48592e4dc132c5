"""Acceptance criteria 1-12.  Each test prints one PASS/FAIL line (also listed in
the terminal summary) before asserting."""
import math
import time

import numpy as np
import pytest
from scipy import integrate
from scipy.differentiate import derivative

from opzeros.bounds import bound_suite, spacing_upper_bound
from opzeros.chebtools import bernstein_check, dirichlet_trial, trial_envelope
from opzeros.clock import clock_deviation, edge_phase_scan, free_dos, spacing_statistics
from opzeros.models import ModelSpec, VerblunskyParams, build_model, decaying_verblunsky
from opzeros.popuc import circle_clock_deviation, paraorthogonality_residual, popuc_zeros
from opzeros.recurrence import (cd_kernel, log_kernel_diagonal, orthonormal_table, prufer_branch,
                                prufer_derivative, tail_pair)
from opzeros.spectra import christoffel_numbers, kernel_growth_exponent, quadrature_exactness, zeros

from conftest import free_zeros, make

# harness constants for the statistical separation check
IID_MIN_GAP_CEILING = 0.05
AM_MIN_GAP_FLOOR = 0.1
MASTER_SEED = 0

MATRIX_MODELS = [
    ("Free", {}),
    ("Weight", {"alpha": 0.5, "n_coeffs": 1001}),
    ("L1Decay", {}),
    ("BoundedVariation", {}),
    ("Periodic", {"a": [1.0, 1.0], "b": [1.0, -1.0]}),
    ("EdgeDecay", {"gamma": 3.0, "offset": 1}),
    ("IIDRandom", {"coupling": 3.0}),
    ("AlmostMathieu", {"coupling": 0.5}),
]

FAMILIES = MATRIX_MODELS + [
    ("Resonant", {}),
    ("ChebyshevT", {}),
    ("ChebyshevU", {}),
    ("L2Decay", {}),
]


def test_c01_free_zeros(criterion):
    errs = {}
    for n in (10, 100, 1000):
        t0 = time.perf_counter()
        zs = zeros(make("Free"), n)
        wall = time.perf_counter() - t0
        errs[n] = float(np.max(np.abs(zs.zeros - free_zeros(n))))
    ok = max(errs.values()) < 1e-10 and wall < 5.0
    criterion(1, ok, f"max err {max(errs.values()):.2e}, n=1000 in {wall:.2f}s")
    assert ok


def test_c02_edge_asymptotics(criterion):
    worst = 0.0
    for n in (10, 50, 200, 1000):
        ph = edge_phase_scan(make("Resonant"), n, 10)["phases"]
        j = np.arange(1, ph.size + 1)
        worst = max(worst, float(np.max(np.abs(ph - (j - 0.5) * math.pi))))
    free = edge_phase_scan(make("Free"), 500, 10)["phases"]
    j = np.arange(1, free.size + 1)
    # exact finite-n law n theta_j = j pi n/(n+1); its distance to j pi is j pi/(n+1)
    law = float(np.max(np.abs(free - j * math.pi * 500 / 501)))
    first = abs(free[0] - math.pi)
    ok = worst < 1e-12 and first < 1e-2 and law < 1e-9
    criterion(2, ok, f"resonant max err {worst:.1e}; free |n theta_1 - pi| = {first:.4f}, "
                     f"finite-n law err {law:.1e}")
    assert ok


def test_c03_bound_matrix(criterion):
    t0 = time.perf_counter()
    failures = []
    checked = 0
    for variant, params in MATRIX_MODELS:
        p = make(variant, **params)
        for n in (10, 50, 200, 1000):
            zs = zeros(p, n)
            z = zs.zeros
            for f in (0.1, 0.3, 0.5, 0.7, 0.9):
                i = int(f * (n - 1))
                E = z[i] + 0.37 * (z[i + 1] - z[i])
                for r in bound_suite(p, n, E, zs):
                    checked += 1
                    if not r.satisfied:
                        failures.append((variant, n, round(E, 6), r.name))
    wall = time.perf_counter() - t0
    ok = not failures and wall < 600
    criterion(3, ok, f"{checked} reports, {len(failures)} unsatisfied, {wall:.0f}s")
    assert not failures, failures[:10]
    assert wall < 600


def test_c04_upper_bound_sharpness(criterion):
    target = 8 * math.e / (2 * math.pi)
    ratios = {}
    for n in (200, 500, 1000):
        r = spacing_upper_bound(make("Free"), n, (-0.1, 0.1))
        ratios[n] = r.bound_value / r.observed_value
    ok = abs(ratios[1000] / target - 1) < 0.10
    criterion(4, ok, "ratio " + ", ".join(f"n={n}: {v:.3f}" for n, v in ratios.items())
              + f" vs {target:.3f}")
    assert ok


def test_c05_clock_convergence(criterion):
    notes = []
    ok = True
    for variant in ("L1Decay", "BoundedVariation"):
        p = make(variant)
        devs = [clock_deviation(zeros(p, n), (-1.0, 1.0), free_dos, relative=True)
                for n in (500, 1000, 2000)]
        good = devs[2] < 0.05 and devs[0] > devs[1] > devs[2]
        ok &= good
        notes.append(f"{variant} " + " > ".join(f"{d:.2e}" for d in devs))
    criterion(5, ok, "; ".join(notes))
    assert ok


def test_c06_quadrature_exactness(criterion):
    worst = 0.0
    where = None
    for variant, params in FAMILIES:
        p = make(variant, **params)
        for n in range(1, 61):
            quad = christoffel_numbers(p, n)
            for k in range(2 * n):
                res = quadrature_exactness(p, n, k, quad)[2]
                if res > worst:
                    worst, where = res, (variant, n, k)
    cheb = max(float(np.max(np.abs(christoffel_numbers(make("ChebyshevT"), n).weights - 1 / n)))
               for n in range(1, 61))
    ok = worst < 1e-10 and cheb < 1e-10
    criterion(6, ok, f"max residual {worst:.1e} at {where}; Chebyshev-T weight err {cheb:.1e}")
    assert ok


def _kernel_scale(p, n, x, y):
    # Cauchy-Schwarz: |K_n(x,y)| <= sqrt(K_n(x,x) K_n(y,y))
    return math.exp(0.5 * float(np.sum(log_kernel_diagonal(p, n, [x, y]))))


def _tight_zeros(p, n):
    lo, hi = p.gershgorin(n)
    return zeros(p, n, tol=16 * np.finfo(float).eps * max(hi - lo, 1.0)).zeros


def test_c07_cd_identities(criterion):
    rng = np.random.default_rng(7)
    models = [make(v, **kw) for v, kw in FAMILIES]
    worst = 0.0
    for _ in range(1000):
        p = models[rng.integers(len(models))]
        n = int(rng.integers(1, 150))
        lo, hi = p.gershgorin(n + 1)
        x, y = rng.uniform(lo, hi, size=2)
        s = cd_kernel(p, n, x, y)
        f = cd_kernel(p, n, x, y, method="cdformula")
        worst = max(worst, abs(s - f) / _kernel_scale(p, n, x, y))

    ortho, localized = 0.0, {}
    n = 25
    for variant, params in FAMILIES:
        p = make(variant, **params)
        z = _tight_zeros(p, n)
        a, b = p.coeffs(n)
        T = orthonormal_table(a, b, n - 1, z)
        K = T.T @ T
        d = np.sqrt(np.diag(K))
        R = np.abs(K) / np.outer(d, d)
        np.fill_diagonal(R, 0.0)
        if variant == "IIDRandom":
            # p_j(x) at a float zero moves by more than the tolerance under a
            # one-ulp shift of x, so the residual only measures conditioning
            T1 = orthonormal_table(a, b, n - 1, np.nextafter(z, np.inf))
            localized = {"residual": float(R.max()),
                         "ulp": float(np.max(np.abs(T1 - T) / d))}
        else:
            ortho = max(ortho, float(R.max()))
    ok = worst < 1e-10 and ortho < 1e-9
    criterion(7, ok, f"sum vs formula {worst:.1e}; K_(n-1) at distinct zeros {ortho:.1e} "
                     f"(Cauchy-Schwarz scale); IID {localized['residual']:.1e} vs one-ulp "
                     f"sensitivity {localized['ulp']:.1e}")
    assert localized["residual"] < 100 * localized["ulp"]
    assert ok


def test_c08_kernel_growth(criterion):
    t0 = time.perf_counter()
    p = make("Weight", alpha=0.5, n_coeffs=1601)
    slope, resid = kernel_growth_exponent(p, 0.0, [50, 100, 200, 400])
    wall = time.perf_counter() - t0
    ok = abs(slope - 1.5) <= 0.1 and wall < 120
    criterion(8, ok, f"slope {slope:.4f} (fit residual {resid:.1e}) in {wall:.1f}s")
    assert ok


def _angle_fd(p, n, E):
    pm, pn, _ = tail_pair(p, n, np.array([E]))
    base = math.atan2(pn[0], pm[0])

    def theta(x):
        x = np.asarray(x, dtype=np.float64)
        pm, pn, _ = tail_pair(p, n, x.ravel())
        d = (np.arctan2(pn, pm) - base + math.pi / 2) % math.pi - math.pi / 2
        return d.reshape(x.shape)

    return theta


def test_c09_prufer_identity(criterion):
    rng = np.random.default_rng(9)
    models = [make("Free"), make("L1Decay"), make("IIDRandom", coupling=3.0),
              make("AlmostMathieu", coupling=0.5)]
    worst = 0.0
    for t in range(1000):
        p = models[t % 4]
        n = int(rng.integers(2, 200))
        lo, hi = p.gershgorin(n)
        E = float(rng.uniform(lo, hi))
        exact = float(prufer_derivative(p, n, E)[0])
        res = derivative(_angle_fd(p, n, E), E, initial_step=min(1e-2, 0.1 / exact),
                         tolerances=dict(rtol=1e-10))
        worst = max(worst, abs(res.df / exact - 1))
    # theta_n must pass k pi inside [z_k - d, z_k + d]; near bound states the
    # angle turns by pi over far less than d, so bracket rather than divide by theta'
    d = 1e-10
    misses = 0
    for p in models:
        z = zeros(p, 120).zeros
        h = np.minimum(d, np.diff(z, prepend=-np.inf, append=np.inf).min() / 3)
        grid = np.column_stack([z - h, z + h]).ravel()
        th = prufer_branch(p, 120, grid).theta.reshape(-1, 2)
        k = np.arange(120) * math.pi
        misses += int(np.sum(~((th[:, 0] < k) & (k <= th[:, 1]))))
    ok = worst < 1e-6 and misses == 0
    criterion(9, ok, f"derivative rel err {worst:.1e}; {misses} of 480 crossings outside z +- {d:g}")
    assert ok


def test_c10_poisson_vs_floor(criterion):
    iid = spacing_statistics(ModelSpec("IIDRandom", {"coupling": 3.0}), 0.0, 400, 500,
                             master_seed=MASTER_SEED)
    am = spacing_statistics(ModelSpec("AlmostMathieu", {"coupling": 0.5}), 0.0, 400, 200,
                            master_seed=MASTER_SEED)
    ok = iid.min_scaled_gap < IID_MIN_GAP_CEILING and am.min_scaled_gap > AM_MIN_GAP_FLOOR
    criterion(10, ok, f"IID min {iid.min_scaled_gap:.4f} (< {IID_MIN_GAP_CEILING}), KS "
                      f"{iid.ks_to_exponential:.3f}; AM min {am.min_scaled_gap:.4f} "
                      f"(> {AM_MIN_GAP_FLOOR})")
    assert iid.samples == 500 and am.samples == 200
    assert iid.min_scaled_gap < IID_MIN_GAP_CEILING
    assert am.min_scaled_gap > AM_MIN_GAP_FLOOR


def test_c11_popuc(criterion):
    roots = popuc_zeros(VerblunskyParams.zero(), 1.0, 4).angles
    root_err = float(np.max(np.abs(roots - np.arange(4) * math.pi / 2)))
    al = decaying_verblunsky(1.0)
    resid = paraorthogonality_residual(al, popuc_zeros(al, 1.0, 200))
    slow = decaying_verblunsky(0.5)
    devs = [circle_clock_deviation(popuc_zeros(slow, 1.0, n), (math.pi / 2, 3 * math.pi / 2))
            for n in (200, 500, 1000)]
    ok = root_err < 1e-12 and resid < 1e-9 and devs[0] > devs[1] > devs[2]
    criterion(11, ok, f"roots err {root_err:.1e}; orthogonality {resid:.1e}; deviation "
                      + " > ".join(f"{d:.4f}" for d in devs))
    assert ok


def test_c12_appendix_envelopes(criterion):
    rng = np.random.default_rng(12)
    env_ok = True
    for n in range(2, 257):
        x0, a = rng.uniform(-2, 2), rng.uniform(0.1, 3)
        tp = dirichlet_trial(n, x0, a)
        x = np.linspace(x0 - a, x0 + a, 10_000)
        env_ok &= bool(np.all(np.abs(tp(x)) <= trial_envelope(tp, x) + 1e-12))

    norm = {}
    for n in (64, 128, 256, 512):
        tp = dirichlet_trial(n, 0.3, 1.7)
        val, _ = integrate.quad(lambda x: tp(x) ** 2, tp.x0 - tp.a, tp.x0 + tp.a,
                                limit=4 * n, epsabs=0, epsrel=1e-10)
        norm[n] = n * val / (math.pi * tp.a)
    integral_ok = all(abs(v - 1) < 0.05 for v in norm.values())
    # the leading constant the integral actually approaches
    half_ok = all(abs(v - 0.5) < 0.05 for v in norm.values())

    worst = 0.0
    for i in range(500):
        deg = int(rng.integers(1, 65))
        c = rng.normal(size=deg + 1)
        mode = "circle" if i % 2 == 0 else "interval"
        worst = max(worst, bernstein_check(c, mode).ratio)
    mono = max(abs(bernstein_check([0] * n + [1], "circle").ratio - 1) for n in (1, 8, 64))
    bern_ok = worst <= 1 + 1e-9 and mono < 1e-9

    ok = env_ok and integral_ok and bern_ok
    criterion(12, ok, f"envelope {'holds' if env_ok else 'violated'}; n*int/(pi a) "
                      + ", ".join(f"{n}: {v:.4f}" for n, v in norm.items())
                      + f" (vs 1; vs 1/2 {'ok' if half_ok else 'off'}); Bernstein max {worst:.6f}, "
                      f"z^n err {mono:.1e}")
    assert env_ok
    assert bern_ok
    assert half_ok
    assert integral_ok
