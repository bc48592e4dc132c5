"""Command-line experiment harness.

Every subcommand reads its parameters from flags or from a JSON config
(``--config``), writes one artifact (CSV or JSON) and, when ``--out`` is given,
a ``<out>.manifest.json`` recording the config hash, version and wall time.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import bounds as bnd
from . import clock as clk
from . import popuc as puc
from .models import ModelError, ModelSpec, VerblunskyParams, build_model, decaying_verblunsky, variant_fields
from .recurrence import cd_kernel
from .spectra import christoffel_function, christoffel_numbers, dos_derivative, quadrature_exactness, zeros

COMMANDS = ("zeros", "clock", "bounds", "edge", "stats", "popuc", "kernel", "quad")
DIGITS = 17
# bound reports are nested records, so they default to JSON lines
DEFAULT_FORMAT = {"bounds": "json"}
SCHEMA_DIR = Path(__file__).with_name("schemas")

MODEL_ALIASES = {
    "free": "Free",
    "resonant": "Resonant",
    "chebyshev-t": "ChebyshevT",
    "chebyshev-u": "ChebyshevU",
    "l1": "L1Decay",
    "bv": "BoundedVariation",
    "l2": "L2Decay",
    "periodic": "Periodic",
    "edge": "EdgeDecay",
    "iid": "IIDRandom",
    "am": "AlmostMathieu",
    "weight": "Weight",
    "table": "WeightTable",
}

# parameter name -> (type tag, default); "req" marks a required value
_INT, _NUM, _PAIR = "int", "number", "pair"
PARAMS = {
    "zeros": {"n": (_INT, "req"), "tol": (_NUM, None)},
    "clock": {"n": (_INT, "req"), "E0": (_NUM, 0.0), "interval": (_PAIR, None), "j_max": (_INT, 3)},
    "bounds": {"n": (_INT, "req"), "E0": (_NUM, 0.0)},
    "edge": {"n": (_INT, "req"), "j_max": (_INT, 10)},
    "stats": {"n": (_INT, "req"), "E0": (_NUM, 0.0), "trials": (_INT, 500), "window": (_NUM, None)},
    "popuc": {"n": (_INT, "req"), "beta_angle": (_NUM, 0.0), "alpha_power": (_NUM, None),
              "alpha_scale": (_NUM, 1.0), "arc": (_PAIR, None)},
    "kernel": {"n": (_INT, "req"), "x": (_NUM, 0.0), "y": (_NUM, None)},
    "quad": {"n": (_INT, "req")},
}


def schema_path(name: str) -> Path:
    """Shipped JSON schema: ``config``, ``manifest``, ``bound_report`` or a command name."""
    return SCHEMA_DIR / f"{name}.schema.json"


class ConfigError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def fmt(x) -> str:
    return f"{float(x):.{DIGITS}g}"


def _line_of(text: str | None, key: str) -> int:
    if not text:
        return 0
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return 1


def _coerce(kind, value, key, text):
    line = _line_of(text, key)
    if kind == _INT:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(line, f"parameter {key!r} must be an integer, got {value!r}")
        return int(value)
    if kind == _NUM:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(line, f"parameter {key!r} must be a number, got {value!r}")
        return float(value)
    if kind == _PAIR:
        if (not isinstance(value, (list, tuple)) or len(value) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
            raise ConfigError(line, f"parameter {key!r} must be a pair of numbers")
        return [float(value[0]), float(value[1])]
    raise AssertionError(kind)


def validate(config: dict, text: str | None = None) -> dict:
    """Type-check a config against the per-command table; returns it normalized."""
    if not isinstance(config, dict):
        raise ConfigError(1, "config must be a JSON object")
    command = config.get("command")
    if command not in COMMANDS:
        raise ConfigError(_line_of(text, "command"), f"unknown command {command!r}")
    table = PARAMS[command]
    given = dict(config.get("parameters") or {})
    unknown = sorted(set(given) - set(table))
    if unknown:
        raise ConfigError(_line_of(text, unknown[0]), f"{command} takes no parameter {unknown[0]!r}")
    params = {}
    for key, (kind, default) in table.items():
        if given.get(key) is None:
            if default == "req":
                raise ConfigError(_line_of(text, "parameters"), f"missing required parameter {key!r}")
            params[key] = default
        else:
            params[key] = _coerce(kind, given[key], key, text)
    if "n" in params and params["n"] < 1:
        raise ConfigError(_line_of(text, "n"), "parameter 'n' must be at least 1")
    model = config.get("model")
    if command != "popuc":
        if not isinstance(model, dict):
            raise ConfigError(_line_of(text, "model"), "model must be an object with a 'variant'")
        try:
            spec = ModelSpec.from_dict(model)
        except ModelError as exc:
            raise ConfigError(_line_of(text, exc.field), str(exc)) from None
        model = spec.to_dict()
    out = config.get("output") or {}
    fmt_ = out.get("format") or DEFAULT_FORMAT.get(command, "csv")
    if fmt_ not in ("csv", "json"):
        raise ConfigError(_line_of(text, "format"), f"format must be csv or json, got {fmt_!r}")
    return {
        "command": command,
        "model": model,
        "parameters": params,
        "seed": int(config.get("seed", 0)),
        "output": {"path": out.get("path"), "format": fmt_},
    }


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# artifacts


class Artifact:
    """Tabular rows plus a JSON payload; written in the requested format.

    With ``lines`` the JSON form is one object per line instead of ``payload``.
    """

    def __init__(self, header, rows, payload, lines=None):
        self.header = header
        self.rows = rows
        self.payload = payload
        self.lines = lines

    def render(self, form: str) -> str:
        if form == "json" and self.lines is not None:
            return "".join(json.dumps(_plain(x), sort_keys=True) + "\n" for x in self.lines)
        if form == "json":
            return json.dumps(_plain(self.payload), sort_keys=True, indent=1) + "\n"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
        return buf.getvalue()


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in (v.tolist() if isinstance(v, np.ndarray) else v)]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _model(cfg):
    spec = ModelSpec.from_dict(cfg["model"])
    n = cfg["parameters"].get("n", 1)
    if spec.variant == "Weight" and int(spec.params["n_coeffs"]) < 4 * n + 1:
        spec = ModelSpec("Weight", {**spec.params, "n_coeffs": 4 * n + 1})
    return spec, build_model(spec)


def _dos_fn(spec, params, zs):
    if spec.variant == "Free" and spec.params["a1"] == 1.0:
        return clk.free_dos, "free"
    if spec.variant == "Periodic":
        p = len(spec.params["a"])
        return (lambda E: clk.periodic_dos(params, p, E)), "discriminant"
    return (lambda E: np.array([dos_derivative(zs, e).value for e in np.atleast_1d(E)])), "empirical"


def run_zeros(cfg, threads):
    _, params = _model(cfg)
    p = cfg["parameters"]
    zs = zeros(params, p["n"], p["tol"])
    q = christoffel_numbers(params, p["n"], zs)
    rows = [(k, float(x), float(w)) for k, (x, w) in enumerate(zip(zs.zeros, q.weights), start=1)]
    payload = {"n": zs.n, "zeros": zs.zeros, "weights": q.weights, "tol": zs.tol}
    return Artifact(["index", "zero", "weight"], rows, payload), {"max_zero": float(zs.zeros[-1])}


def run_clock(cfg, threads):
    spec, params = _model(cfg)
    p = cfg["parameters"]
    zs = zeros(params, p["n"])
    dos_fn, source = _dos_fn(spec, params, zs)
    rep = clk.nearest_zeros(zs, p["E0"], p["j_max"])
    rho = float(np.atleast_1d(dos_fn(p["E0"]))[0])
    labels = sorted(rep.nearest)
    gaps = {l0: p["n"] * (rep.nearest[l1] - rep.nearest[l0]) * rho for l0, l1 in zip(labels[:-1], labels[1:])}
    dev = None
    if p["interval"] is not None:
        dev = clk.clock_deviation(zs, p["interval"], dos_fn, relative=True)
    rep = clk.SpacingReport(rep.E0, rep.n, rep.nearest, gaps, dev, rep.partial, source)
    d = rep.to_dict()
    rows = [(int(k), rep.nearest[k], gaps.get(k, "")) for k in labels]
    return Artifact(["label", "zero", "scaled_gap"], rows, d), {"deviation": dev}


def run_bounds(cfg, threads):
    _, params = _model(cfg)
    p = cfg["parameters"]
    reports = bnd.bound_suite(params, p["n"], p["E0"])
    rows = [(r.name, r.kind, r.bound_value, r.observed_value, str(r.satisfied).lower()) for r in reports]
    dicts = [r.to_dict() for r in reports]
    art = Artifact(["name", "kind", "bound", "observed", "satisfied"], rows, {"reports": dicts}, dicts)
    return art, {"all_satisfied": all(r.satisfied for r in reports)}


def run_edge(cfg, threads):
    _, params = _model(cfg)
    p = cfg["parameters"]
    scan = clk.edge_phase_scan(params, p["n"], p["j_max"])
    ph = scan["phases"]
    rows = [(j, float(v), float(v / math.pi)) for j, v in enumerate(ph, start=1)]
    payload = {"n": p["n"], "phases": ph, "partial": scan["partial"], "hint": scan["hint"]}
    return Artifact(["j", "phase", "phase_over_pi"], rows, payload), {
        "phase1_over_pi": float(ph[0] / math.pi) if ph.size else None}


def run_stats(cfg, threads):
    spec = ModelSpec.from_dict(cfg["model"])
    p = cfg["parameters"]
    st = clk.spacing_statistics(spec, p["E0"], p["n"], p["trials"], cfg["seed"], p["window"], threads)
    edges, counts = st.gap_histogram
    centers = 0.5 * (edges[1:] + edges[:-1])
    mass = counts / max(st.samples, 1)
    rows = [(float(c), float(m)) for c, m in zip(centers, mass)]
    return Artifact(["bin_center", "mass"], rows, st.to_dict()), {
        "min_scaled_gap": st.min_scaled_gap, "ks": st.ks_to_exponential}


def run_popuc(cfg, threads):
    p = cfg["parameters"]
    alpha = (VerblunskyParams.zero() if p["alpha_power"] is None
             else decaying_verblunsky(p["alpha_power"], p["alpha_scale"]))
    beta = complex(math.cos(p["beta_angle"]), math.sin(p["beta_angle"]))
    cz = puc.popuc_zeros(alpha, beta, p["n"])
    dev = None if p["arc"] is None else puc.circle_clock_deviation(cz, p["arc"])
    rows = [(k, float(t), math.cos(t), math.sin(t)) for k, t in enumerate(cz.angles, start=1)]
    payload = {"n": cz.n, "beta_angle": p["beta_angle"], "angles": cz.angles, "deviation": dev}
    return Artifact(["index", "angle", "cos", "sin"], rows, payload), {"deviation": dev}


def run_kernel(cfg, threads):
    _, params = _model(cfg)
    p = cfg["parameters"]
    x = p["x"]
    y = x if p["y"] is None else p["y"]
    k_sum = cd_kernel(params, p["n"], x, y, "sum")
    k_cd = cd_kernel(params, p["n"], x, y, "cdformula")
    lam = christoffel_function(params, p["n"], x)
    row = (p["n"], x, y, k_sum, k_cd, lam)
    payload = {"n": p["n"], "x": x, "y": y, "sum": k_sum, "cdformula": k_cd, "christoffel_x": lam}
    return Artifact(["n", "x", "y", "sum", "cdformula", "christoffel_x"], [row], payload), {"sum": k_sum}


def run_quad(cfg, threads):
    _, params = _model(cfg)
    n = cfg["parameters"]["n"]
    q = christoffel_numbers(params, n)
    rows = []
    for k in range(2 * n):
        lhs, rhs, res = quadrature_exactness(params, n, k, q)
        rows.append((k, lhs, rhs, res))
    worst = max(r[3] for r in rows)
    payload = {"n": n, "nodes": q.nodes, "weights": q.weights,
               "moments": [{"k": k, "exact": l, "rule": r, "residual": e} for k, l, r, e in rows],
               "max_residual": worst}
    return Artifact(["k", "moment", "rule", "residual"], rows, payload), {"max_residual": worst}


RUNNERS = {
    "zeros": run_zeros,
    "clock": run_clock,
    "bounds": run_bounds,
    "edge": run_edge,
    "stats": run_stats,
    "popuc": run_popuc,
    "kernel": run_kernel,
    "quad": run_quad,
}


def execute(cfg: dict, threads: int = 1):
    """Run a validated config; returns ``(artifact_text, summary)``."""
    art, summary = RUNNERS[cfg["command"]](cfg, threads)
    return art.render(cfg["output"]["format"]), summary


def _write(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_manifest(out, cfg, artifacts, wall, threads):
    man = {
        "config": cfg,
        "config_hash": config_hash(cfg),
        "version": __version__,
        "wall_time_s": wall,
        "threads": threads,
        "artifacts": [str(a) for a in artifacts],
    }
    _write(str(out) + ".manifest.json", json.dumps(_plain(man), sort_keys=True, indent=1) + "\n")


def run(cfg: dict, threads: int = 1) -> int:
    t0 = time.perf_counter()
    text, _ = execute(cfg, threads)
    out = cfg["output"]["path"]
    if out is None:
        sys.stdout.write(text)
        return 0
    _write(out, text)
    write_manifest(out, cfg, [out], time.perf_counter() - t0, threads)
    return 0


# ---------------------------------------------------------------------------
# sweep


def _sweep_one(job):
    cfg, threads = job
    text, summary = execute(cfg, threads)
    out = cfg["output"]["path"]
    if out is not None:
        _write(out, text)
    return summary


def _with_value(cfg, axis, value, out_stem, ext):
    c = json.loads(json.dumps(cfg))
    if c.get("command") not in PARAMS:
        raise ConfigError(0, f"unknown command {c.get('command')!r}")
    if axis in PARAMS[c["command"]]:
        c["parameters"][axis] = int(value) if PARAMS[c["command"]][axis][0] == _INT else value
    elif c.get("model") is not None and axis in variant_fields(c["model"].get("variant")):
        c["model"][axis] = value
    else:
        raise ConfigError(0, f"sweep axis {axis!r} is neither a parameter nor a model field")
    c.setdefault("output", {})["format"] = ext
    c = validate(c)
    if out_stem is not None:
        c["output"]["path"] = f"{out_stem}_{axis}={value:g}.{ext}"
    return c


def sweep(cfg: dict, axis: str, values, threads: int = 1, out: str | None = None) -> str:
    """Run ``cfg`` once per value of ``axis``; returns the summary CSV text."""
    form = (cfg.get("output") or {}).get("format") or DEFAULT_FORMAT.get(cfg.get("command"), "csv")
    stem = None if out is None else str(Path(out).with_suffix(""))
    jobs = [(_with_value(cfg, axis, v, stem, form), 1) for v in values]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            summaries = list(pool.map(_sweep_one, jobs))
    else:
        summaries = [_sweep_one(j) for j in jobs]
    keys = sorted({k for s in summaries for k in s})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([axis, "artifact", *keys])
    for v, (c, _), s in zip(values, jobs, summaries):
        cells = []
        for k in keys:
            x = s.get(k)
            cells.append("" if x is None else fmt(x) if isinstance(x, float) else x)
        w.writerow([fmt(v), c["output"]["path"] or "", *cells])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# argument parsing


def _threads(arg):
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("OPZEROS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SystemExit(f"OPZEROS_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _model_from_args(ns) -> dict | None:
    if ns.model is None:
        return None
    variant = MODEL_ALIASES.get(ns.model.lower(), ns.model)
    m = {"variant": variant}
    if ns.lam is not None:
        m["coupling"] = ns.lam
    if ns.gamma is not None:
        m["gamma"] = ns.gamma
    if ns.offset is not None:
        m["offset"] = ns.offset
    if ns.a_block is not None:
        m["a"] = ns.a_block
    if ns.b_block is not None:
        m["b"] = ns.b_block
    for item in ns.model_param or []:
        key, _, raw = item.partition("=")
        try:
            m[key] = json.loads(raw)
        except json.JSONDecodeError:
            m[key] = raw
    return m


def _params_from_args(ns, command) -> dict:
    out = {}
    for key in PARAMS[command]:
        v = getattr(ns, key, None)
        if v is not None:
            out[key] = v
    return out


def _add_common(p):
    g = p.add_argument_group("global")
    g.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    g.add_argument("--threads", type=int, default=None, help="worker count (default: OPZEROS_THREADS or cores)")
    g.add_argument("--out", default=None, help="artifact path (stdout when omitted)")
    g.add_argument("--format", choices=("csv", "json"), default=None)
    g.add_argument("--config", default=None, help="JSON config file")
    m = p.add_argument_group("model")
    m.add_argument("--model", default=None, help="free, resonant, chebyshev-t, chebyshev-u, l1, bv, l2, "
                   "periodic, edge, iid, am, weight, table (or a variant name)")
    m.add_argument("--lambda", dest="lam", type=float, default=None, help="coupling for iid / am")
    m.add_argument("--gamma", type=float, default=None)
    m.add_argument("--offset", type=int, default=None)
    m.add_argument("--a-block", type=float, nargs="+", default=None)
    m.add_argument("--b-block", type=float, nargs="+", default=None)
    m.add_argument("--model-param", action="append", metavar="KEY=JSON")
    q = p.add_argument_group("parameters")
    q.add_argument("--n", type=int, default=None)
    q.add_argument("--E0", type=float, default=None)
    q.add_argument("--interval", type=float, nargs=2, default=None)
    q.add_argument("--arc", type=float, nargs=2, default=None)
    q.add_argument("--j-max", dest="j_max", type=int, default=None)
    q.add_argument("--tol", type=float, default=None)
    q.add_argument("--trials", type=int, default=None)
    q.add_argument("--window", type=float, default=None)
    q.add_argument("--beta-angle", dest="beta_angle", type=float, default=None)
    q.add_argument("--alpha-power", dest="alpha_power", type=float, default=None)
    q.add_argument("--alpha-scale", dest="alpha_scale", type=float, default=None)
    q.add_argument("--x", type=float, default=None)
    q.add_argument("--y", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opzeros", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_common(sub.add_parser(name))
    sw = sub.add_parser("sweep", help="run a command over values of one parameter")
    _add_common(sw)
    sw.add_argument("--command", dest="inner", choices=COMMANDS, default=None)
    sw.add_argument("--axis", required=True)
    sw.add_argument("--values", type=float, nargs="*", default=[])
    return parser


def _load_config(path):
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.lineno, exc.msg) from None
    return data, text


def assemble(ns) -> tuple[dict, str | None]:
    """Merge the config file (if any) with flags; flags win."""
    data, text = ({}, None) if ns.config is None else _load_config(ns.config)
    command = ns.command if ns.command != "sweep" else (ns.inner or data.get("command"))
    data = dict(data)
    data["command"] = command
    params = dict(data.get("parameters") or {})
    if command in PARAMS:
        params.update(_params_from_args(ns, command))
    data["parameters"] = params
    model = _model_from_args(ns)
    if model is not None:
        data["model"] = model
    if ns.seed is not None:
        data["seed"] = ns.seed
    out = dict(data.get("output") or {})
    if ns.out is not None:
        out["path"] = ns.out
    if ns.format is not None:
        out["format"] = ns.format
    elif "format" not in out and out.get("path", "").endswith(".json"):
        out["format"] = "json"
    data["output"] = out
    return data, text


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        raw, text = assemble(ns)
        # a sweep validates once per value, after the axis is filled in
        cfg = raw if ns.command == "sweep" else validate(raw, text)
    except ConfigError as exc:
        where = ns.config or "arguments"
        print(f"{where}:{exc.line}: {exc.args[0].split(': ', 1)[1]}", file=sys.stderr)
        return 2
    except ModelError as exc:
        print(f"{ns.config or 'arguments'}:0: {exc}", file=sys.stderr)
        return 2
    threads = _threads(ns.threads)
    try:
        if ns.command == "sweep":
            return _main_sweep(ns, cfg, threads)
        return run(cfg, threads)
    except ConfigError as exc:
        print(f"arguments:{exc.line}: {exc.args[0].split(': ', 1)[1]}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        # library errors pass through unchanged
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _main_sweep(ns, cfg, threads) -> int:
    t0 = time.perf_counter()
    summary = sweep(cfg, ns.axis, ns.values, threads, ns.out)
    if ns.out is None:
        sys.stdout.write(summary)
        return 0
    path = str(Path(ns.out).with_suffix("")) + "_summary.csv"
    _write(path, summary)
    write_manifest(path, {**cfg, "sweep": {"axis": ns.axis, "values": ns.values}},
                   [path], time.perf_counter() - t0, threads)
    return 0

if __name__ == "__main__":
    raise SystemExit(main())
