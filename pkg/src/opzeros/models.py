"""Jacobi-parameter and Verblunsky-coefficient model families.

All sequences are 1-indexed (``a(1), b(1), ...``) except Verblunsky
coefficients, which start at ``alpha(0)``.  Every accessor is a pure
function of the index, so random models are reproducible draw by draw.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.special import roots_jacobi

__all__ = [
    "JacobiParams",
    "ModelSpec",
    "VerblunskyParams",
    "ModelError",
    "build_model",
    "periodize",
    "stieltjes_from_weight",
    "counter_uniform",
    "from_arrays",
    "read_weight_table",
    "write_weight_table",
    "decaying_verblunsky",
    "variant_fields",
]

IndexFn = Callable[[np.ndarray], np.ndarray]


class ModelError(ValueError):
    """Invalid model specification; ``field`` names the offending input."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# ---------------------------------------------------------------------------
# counter-based random numbers

_BLOCK = 1024  # draws per cached block; multiple of 4 (Philox emits 4 words per counter step)


def _philox_block(seed: int, block: int) -> np.ndarray:
    bitgen = np.random.Philox(key=seed & 0xFFFFFFFFFFFFFFFF)
    bitgen.advance(block * (_BLOCK // 4))
    raw = bitgen.random_raw(_BLOCK)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


_block_cache: dict[tuple[int, int], np.ndarray] = {}


def counter_uniform(seed: int, idx) -> np.ndarray:
    """Uniform [0, 1) draws that depend only on ``(seed, index)``.

    Index ``n >= 1`` maps to the ``n``-th word of the Philox stream keyed by
    ``seed``; blocks are cached, so repeated queries are bit-identical.
    """
    idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
    if idx.size and idx.min() < 1:
        raise ModelError("index", "random sequences are 1-indexed")
    pos = idx - 1
    out = np.empty(idx.shape, dtype=np.float64)
    blocks = pos // _BLOCK
    for blk in np.unique(blocks):
        key = (int(seed), int(blk))
        arr = _block_cache.get(key)
        if arr is None:
            arr = _philox_block(int(seed), int(blk))
            if len(_block_cache) > 4096:
                _block_cache.clear()
            _block_cache[key] = arr
        sel = blocks == blk
        out[sel] = arr[pos[sel] - blk * _BLOCK]
    return out


# ---------------------------------------------------------------------------
# parameter containers


@dataclass(frozen=True)
class JacobiParams:
    """Recursion coefficients ``a_n > 0`` and ``b_n`` for ``n >= 1``.

    ``a_fn``/``b_fn`` map an int64 index array to float arrays.  ``a0`` is the
    boundary convention ``a_0 = 1`` and is never produced by ``a_fn``.
    Weight-driven models additionally carry the (unnormalized) weight, its
    support and total mass.
    """

    a_fn: IndexFn
    b_fn: IndexFn
    descriptor: str = "custom"
    length: int | None = None
    weight: Callable[[np.ndarray], np.ndarray] | None = None
    support: tuple[float, float] | None = None
    mass: float = 1.0
    breakpoints: tuple[float, ...] = ()
    a0: float = field(default=1.0, init=False)

    def _check(self, idx: np.ndarray) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        if idx.size and idx.min() < 1:
            raise ModelError("index", "Jacobi parameters are 1-indexed")
        if self.length is not None and idx.size and idx.max() > self.length:
            raise ModelError(
                "index", f"{self.descriptor} only defines {self.length} coefficients"
            )
        return idx

    def a_values(self, idx) -> np.ndarray:
        idx = self._check(idx)
        vals = np.asarray(self.a_fn(idx), dtype=np.float64)
        if vals.size and not np.all(vals > 0):
            bad = int(idx[np.argmin(vals > 0)])
            raise ModelError("a", f"a({bad}) = {float(self.a_fn(np.array([bad]))[0])!r} is not positive")
        return vals

    def b_values(self, idx) -> np.ndarray:
        idx = self._check(idx)
        return np.asarray(self.b_fn(idx), dtype=np.float64)

    def a(self, n: int) -> float:
        return float(self.a_values([n])[0])

    def b(self, n: int) -> float:
        return float(self.b_values([n])[0])

    def coeffs(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Arrays ``(a_1..a_n, b_1..b_n)``."""
        idx = np.arange(1, n + 1, dtype=np.int64)
        if n == 0:
            return np.empty(0), np.empty(0)
        return self.a_values(idx), self.b_values(idx)

    def gershgorin(self, n: int) -> tuple[float, float]:
        """Interval containing the spectrum of every ``J_{m;F}``, ``m <= n``."""
        a, b = self.coeffs(n)
        left = np.concatenate(([0.0], a[: n - 1]))
        right = np.concatenate((a[: n - 1], [0.0]))
        rad = left + right
        return float(np.min(b - rad)), float(np.max(b + rad))


def from_arrays(a, b, descriptor: str = "table") -> JacobiParams:
    """Finite table of coefficients; queries past the end raise."""
    a = np.asarray(a, dtype=np.float64).copy()
    b = np.asarray(b, dtype=np.float64).copy()
    if a.shape != b.shape:
        raise ModelError("coefficients", "a and b tables differ in length")
    if a.size == 0:
        raise ModelError("coefficients", "empty coefficient table")
    if not np.all(a > 0):
        raise ModelError("a", f"non-positive entry at n={int(np.argmin(a > 0)) + 1}")
    a.setflags(write=False)
    b.setflags(write=False)
    return JacobiParams(lambda i: a[i - 1], lambda i: b[i - 1], descriptor, length=a.size)


@dataclass(frozen=True)
class VerblunskyParams:
    """Verblunsky coefficients ``alpha_n`` (``n >= 0``) inside the unit disk."""

    alpha_fn: Callable[[np.ndarray], np.ndarray]
    descriptor: str = "custom"

    def values(self, n: int) -> np.ndarray:
        """``alpha_0 .. alpha_{n-1}`` as a complex array."""
        if n <= 0:
            return np.empty(0, dtype=np.complex128)
        al = np.asarray(self.alpha_fn(np.arange(n, dtype=np.int64)), dtype=np.complex128)
        al = np.broadcast_to(al, (n,)).copy()
        if np.any(np.abs(al) >= 1.0):
            bad = int(np.argmax(np.abs(al) >= 1.0))
            raise ModelError("alpha", f"|alpha({bad})| = {abs(al[bad])!r} is not < 1")
        return al

    def alpha(self, n: int) -> complex:
        return complex(self.alpha_fn(np.array([n], dtype=np.int64))[0]) if n >= 0 else 0j

    @classmethod
    def zero(cls) -> "VerblunskyParams":
        return cls(lambda i: np.zeros(i.shape, dtype=np.complex128), "zero")

    @classmethod
    def from_sequence(cls, values, descriptor: str = "table") -> "VerblunskyParams":
        arr = np.asarray(values, dtype=np.complex128).copy()
        if np.any(np.abs(arr) >= 1.0):
            raise ModelError("alpha", "coefficients must lie strictly inside the unit disk")

        def fn(i):
            if i.size and i.max() >= arr.size:
                raise ModelError("alpha", f"table only defines {arr.size} coefficients")
            return arr[i]

        return cls(fn, descriptor)


def decaying_verblunsky(power: float, scale: float = 1.0, shift: int = 2) -> VerblunskyParams:
    """``alpha_n = scale * (n + shift)^(-power)``."""
    if power <= 0:
        raise ModelError("power", "must be positive")
    if abs(scale) / shift**power >= 1:
        raise ModelError("scale", "alpha_0 must lie inside the unit disk")
    return VerblunskyParams(
        lambda i: scale * (i + float(shift)) ** (-power) + 0j,
        f"decay(power={power}, scale={scale}, shift={shift})",
    )


# ---------------------------------------------------------------------------
# model specifications

# required parameters and defaults per variant
_VARIANTS: dict[str, dict[str, Any]] = {
    "Free": {"a1": 1.0},
    "Resonant": {},
    "ChebyshevT": {},
    "ChebyshevU": {},
    "L1Decay": {"a_amp": 1.0, "a_base": 2.0, "b_amp": 1.0, "b_base": 3.0},
    "BoundedVariation": {
        "a_limit": 1.0,
        "b_limit": 0.0,
        "a_amp": 1.0,
        "b_amp": 0.0,
        "shift": 10.0,
        "power": 1.0,
    },
    "L2Decay": {"b_amp": 1.0, "power": 0.7, "alternating": True},
    "Periodic": {"a": None, "b": None},
    "EdgeDecay": {"gamma": None, "offset": 0},
    "IIDRandom": {"coupling": None, "seed": 0, "distribution": "uniform"},
    "AlmostMathieu": {"coupling": None, "frequency": (math.sqrt(5.0) - 1.0) / 2.0, "phase": 0.0},
    "WeightTable": {"a": None, "b": None},
    "Weight": {"alpha": 0.0, "beta": 0.0, "n_coeffs": 200},
}


def variant_fields(variant: str) -> tuple[str, ...]:
    """Parameter names accepted by a model family."""
    if variant not in _VARIANTS:
        raise ModelError("variant", f"unknown model variant {variant!r}")
    return tuple(_VARIANTS[variant])


@dataclass(frozen=True)
class ModelSpec:
    """A model family plus its parameters.

    Serializes to ``{"variant": ..., **params}``.  ``Weight`` is the
    even weight ``|x|^alpha (1 - x^2)^beta`` on ``[-1, 1]`` realized through
    the Stieltjes procedure.
    """

    variant: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ModelError("variant", f"unknown model variant {self.variant!r}")
        merged = dict(_VARIANTS[self.variant])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ModelError(sorted(unknown)[0], f"not a parameter of {self.variant}")
        merged.update(self.params)
        missing = [k for k, v in merged.items() if v is None]
        if missing:
            raise ModelError(missing[0], f"required for {self.variant}")
        object.__setattr__(self, "params", merged)
        self._validate()

    def _validate(self):
        p = self.params
        v = self.variant
        if v == "Free" and not p["a1"] > 0:
            raise ModelError("a1", "must be positive")
        if v in ("Periodic", "WeightTable"):
            a, b = list(p["a"]), list(p["b"])
            if len(a) == 0:
                raise ModelError("a", "empty block")
            if len(a) != len(b):
                raise ModelError("b", "a and b blocks must have equal length")
            if any(not x > 0 for x in a):
                raise ModelError("a", "entries must be positive")
        if v == "IIDRandom":
            if p["coupling"] < 0:
                raise ModelError("coupling", "must be non-negative")
            if not 0 <= int(p["seed"]) < 2**64:
                raise ModelError("seed", "must be a 64-bit unsigned value")
            if p["distribution"] != "uniform":
                raise ModelError("distribution", "only uniform[-1,1] is supported")
        if v == "EdgeDecay" and not p["gamma"] > 0:
            raise ModelError("gamma", "must be positive")
        if v == "L1Decay":
            if p["a_base"] <= 1 or p["b_base"] <= 1:
                raise ModelError("a_base", "bases must exceed 1 for summable decay")
            if 1 + p["a_amp"] / p["a_base"] <= 0:
                raise ModelError("a_amp", "a_1 would be non-positive")
        if v == "BoundedVariation":
            if p["shift"] + 1 <= 0 or p["power"] <= 0:
                raise ModelError("shift", "need shift > -1 and power > 0")
        if v == "Weight":
            if p["alpha"] <= -1 or p["beta"] <= -1:
                raise ModelError("alpha", "weight exponents must exceed -1")
            if int(p["n_coeffs"]) < 1:
                raise ModelError("n_coeffs", "must be at least 1")

    @property
    def variation_budget(self) -> float | None:
        """Total variation ``sum |a_{n+1}-a_n| + |b_{n+1}-b_n|`` for BV models."""
        if self.variant != "BoundedVariation":
            return None
        p = self.params
        return (abs(p["a_amp"]) + abs(p["b_amp"])) / (1.0 + p["shift"]) ** p["power"]

    def to_dict(self) -> dict:
        out = {"variant": self.variant}
        for k, v in self.params.items():
            out[k] = list(v) if isinstance(v, (tuple, np.ndarray)) else v
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        if "variant" not in data:
            raise ModelError("variant", "missing discriminator")
        params = {k: v for k, v in data.items() if k != "variant"}
        return cls(data["variant"], params)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


def _const(value: float) -> IndexFn:
    return lambda i: np.full(i.shape, value, dtype=np.float64)


def _semicircle(r: float):
    def w(x):
        x = np.asarray(x, dtype=np.float64)
        return 2.0 / (math.pi * r * r) * np.sqrt(np.maximum(r * r - x * x, 0.0))
    return w


def _arcsine(r: float):
    def w(x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(np.abs(x) < r, 1.0 / (math.pi * np.sqrt(r * r - x * x)), 0.0)
    return w


def build_model(spec: ModelSpec) -> JacobiParams:
    """Realize a :class:`ModelSpec` as a deterministic accessor."""
    p = spec.params
    v = spec.variant
    desc = spec.to_json()
    if v == "Free":
        a1 = float(p["a1"])
        if a1 == 1.0:
            return JacobiParams(_const(1.0), _const(0.0), desc, weight=_semicircle(2.0),
                                support=(-2.0, 2.0))
        return JacobiParams(lambda i: np.where(i == 1, a1, 1.0), _const(0.0), desc)
    if v == "Resonant":
        r2 = math.sqrt(2.0)
        return JacobiParams(lambda i: np.where(i == 1, r2, 1.0), _const(0.0), desc,
                            weight=_arcsine(2.0), support=(-2.0, 2.0))
    if v == "ChebyshevT":
        h = math.sqrt(0.5)
        return JacobiParams(lambda i: np.where(i == 1, h, 0.5), _const(0.0), desc,
                            weight=_arcsine(1.0), support=(-1.0, 1.0))
    if v == "ChebyshevU":
        return JacobiParams(_const(0.5), _const(0.0), desc, weight=_semicircle(1.0),
                            support=(-1.0, 1.0))
    if v == "L1Decay":
        aa, ab, ba, bb = (float(p[k]) for k in ("a_amp", "a_base", "b_amp", "b_base"))
        return JacobiParams(
            lambda i: 1.0 + aa * ab ** (-i.astype(np.float64)),
            lambda i: ba * bb ** (-i.astype(np.float64)),
            desc,
        )
    if v == "BoundedVariation":
        al, bl, aa, ba, s, pw = (
            float(p[k]) for k in ("a_limit", "b_limit", "a_amp", "b_amp", "shift", "power")
        )
        return JacobiParams(
            lambda i: al + aa * (i + s) ** (-pw),
            lambda i: bl + ba * (i + s) ** (-pw),
            desc,
        )
    if v == "L2Decay":
        amp, pw, alt = float(p["b_amp"]), float(p["power"]), bool(p["alternating"])

        def b_fn(i):
            sign = np.where(i % 2 == 1, 1.0, -1.0) if alt else 1.0
            return amp * sign * i.astype(np.float64) ** (-pw)

        return JacobiParams(_const(1.0), b_fn, desc)
    if v in ("Periodic", "WeightTable"):
        a = np.asarray(p["a"], dtype=np.float64)
        b = np.asarray(p["b"], dtype=np.float64)
        if v == "WeightTable":
            return from_arrays(a, b, desc)
        period = a.size
        return JacobiParams(lambda i: a[(i - 1) % period], lambda i: b[(i - 1) % period], desc)
    if v == "EdgeDecay":
        g, off = float(p["gamma"]), int(p["offset"])
        return JacobiParams(lambda i: 1.0 - (i + off).astype(np.float64) ** (-g), _const(0.0), desc)
    if v == "IIDRandom":
        lam, seed = float(p["coupling"]), int(p["seed"])
        return JacobiParams(
            _const(1.0), lambda i: lam * (2.0 * counter_uniform(seed, i) - 1.0), desc
        )
    if v == "AlmostMathieu":
        lam, freq, ph = float(p["coupling"]), float(p["frequency"]), float(p["phase"])
        return JacobiParams(
            _const(1.0), lambda i: lam * np.cos(2.0 * np.pi * freq * i + ph), desc
        )
    if v == "Weight":
        al, be = float(p["alpha"]), float(p["beta"])

        def w(x):
            x = np.asarray(x, dtype=np.float64)
            return np.abs(x) ** al * (1.0 - x * x) ** be

        sing = {-1.0: be, 1.0: be}
        if al != 0:
            sing[0.0] = al
        params = stieltjes_from_weight(w, (-1.0, 1.0), int(p["n_coeffs"]), singular=sing)
        return _retag(params, desc)
    raise ModelError("variant", f"unhandled variant {v!r}")


def _retag(params: JacobiParams, descriptor: str) -> JacobiParams:
    return JacobiParams(
        params.a_fn, params.b_fn, descriptor, params.length, params.weight,
        params.support, params.mass, params.breakpoints,
    )


def periodize(params: JacobiParams, n: int) -> JacobiParams:
    """Period-``n`` repetition of the first ``n`` coefficients."""
    if n < 1:
        raise ModelError("n", "period must be at least 1")
    a, b = params.coeffs(n)
    a.setflags(write=False)
    b.setflags(write=False)
    return JacobiParams(
        lambda i: a[(i - 1) % n], lambda i: b[(i - 1) % n], f"periodize({params.descriptor}, {n})"
    )


# ---------------------------------------------------------------------------
# Stieltjes procedure

def _panel_rule(lo, hi, order, s_left=0.0, s_right=0.0):
    """Nodes, quadrature weights and the singular factor removed on ``[lo, hi]``.

    With nonzero exponents the rule is Gauss-Jacobi for
    ``(x - lo)^s_left (hi - x)^s_right``; the returned ``factor`` is that
    product evaluated at the nodes so the caller can divide it out of the
    user weight.
    """
    h = hi - lo
    if s_left == 0.0 and s_right == 0.0:
        t, w = np.polynomial.legendre.leggauss(order)
        return lo + 0.5 * h * (1.0 + t), 0.5 * h * w, np.ones(order)
    t, w = roots_jacobi(order, s_right, s_left)
    x = lo + 0.5 * h * (1.0 + t)
    scale = (0.5 * h) ** (1.0 + s_left + s_right)
    factor = (0.5 * h * (1.0 + t)) ** s_left * (0.5 * h * (1.0 - t)) ** s_right
    return x, w * scale, factor


def _discretize(weight, support, singular, panels, order):
    c, d = support
    cuts = sorted({c, d, *(x for x in singular if c < x < d)})
    xs, ws = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        edges = np.linspace(lo, hi, panels + 1)
        for k in range(panels):
            sl = singular.get(lo, 0.0) if k == 0 else 0.0
            sr = singular.get(hi, 0.0) if k == panels - 1 else 0.0
            x, w, factor = _panel_rule(edges[k], edges[k + 1], order, sl, sr)
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = np.asarray(weight(x), dtype=np.float64) / factor
            if np.any(~np.isfinite(vals)):
                raise ModelError("weight", "weight is not finite at a quadrature node")
            if np.any(vals < 0):
                bad = x[np.argmax(vals < 0)]
                raise ModelError("weight", f"weight is negative at x={bad!r}")
            xs.append(x)
            ws.append(w * vals)
    return np.concatenate(xs), np.concatenate(ws)


def _stieltjes(x: np.ndarray, w: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal Stieltjes recursion on the discrete measure ``sum w_i delta_{x_i}``."""
    w = w / w.sum()
    a = np.zeros(n)
    b = np.zeros(n)
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    a_prev = 0.0
    for k in range(n):
        b[k] = np.dot(w, x * p * p)
        q = (x - b[k]) * p - a_prev * p_prev
        # one re-orthogonalization pass against the two previous vectors
        q -= np.dot(w, q * p) * p
        if k > 0:
            q -= np.dot(w, q * p_prev) * p_prev
        a[k] = math.sqrt(np.dot(w, q * q))
        if a[k] == 0.0:
            raise ModelError("n_coeffs", f"discrete measure exhausted after {k} coefficients")
        p_prev, p = p, q / a[k]
        a_prev = a[k]
    return a, b


def stieltjes_from_weight(
    weight: Callable[[np.ndarray], np.ndarray],
    support: tuple[float, float],
    n_coeffs: int,
    singular: dict[float, float] | None = None,
    tol: float = 1e-10,
    max_panels: int = 256,
) -> JacobiParams:
    """Recursion coefficients of ``weight(x) dx`` on ``support``, normalized to mass 1.

    ``singular`` maps points (endpoints or interior) to algebraic exponents
    ``s`` such that ``weight(x) / |x - point|^s`` is smooth nearby; panels
    touching those points use Gauss-Jacobi rules.  Panels are doubled until
    the coefficients move by less than ``tol``.  The unnormalized mass is
    kept on the result as ``mass``.
    """
    if n_coeffs < 1:
        raise ModelError("n_coeffs", "must be at least 1")
    c, d = map(float, support)
    if not d > c:
        raise ModelError("support", "need c < d")
    singular = {float(k): float(v) for k, v in (singular or {}).items()}
    if any(v <= -1 for v in singular.values()):
        raise ModelError("singular", "exponents must exceed -1 for integrability")
    order = max(64, n_coeffs // 2 + 32)
    panels = 8
    prev = None
    change = math.inf
    while True:
        x, w = _discretize(weight, (c, d), singular, panels, order)
        mass = float(w.sum())
        if not mass > 0:
            raise ModelError("weight", "weight has zero total mass")
        a, b = _stieltjes(x, w, n_coeffs)
        if prev is not None:
            change = max(np.max(np.abs(a - prev[0])), np.max(np.abs(b - prev[1])))
            if change < tol:
                break
        if panels >= max_panels:
            break
        prev = (a, b)
        panels *= 2
    if change > 1e-6:
        raise ModelError("weight", f"discretization did not converge (residual {change:.3e})")
    params = from_arrays(a, b, f"stieltjes(support=[{c}, {d}], n={n_coeffs})")
    return JacobiParams(
        params.a_fn, params.b_fn, params.descriptor, params.length,
        weight, (c, d), mass, tuple(sorted(singular)),
    )

# ---------------------------------------------------------------------------
# WeightTable CSV persistence


def write_weight_table(path, params: JacobiParams, n: int):
    a, b = params.coeffs(n)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["a_n", "b_n"])
        for x, y in zip(a, b):
            wr.writerow([f"{x:.17g}", f"{y:.17g}"])


def read_weight_table(path) -> ModelSpec:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["a_n", "b_n"]:
        raise ModelError("header", "expected header 'a_n,b_n'")
    a = [float(r[0]) for r in rows[1:] if r]
    b = [float(r[1]) for r in rows[1:] if r]
    return ModelSpec("WeightTable", {"a": a, "b": b})
