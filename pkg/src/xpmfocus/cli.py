"""Command-line experiment runner.

Usage::

    xpmfocus --config run.json --out-dir results [--seed 7] [--threads 4] [--units bits]

The config is a JSON object ``{"kind": ..., "seed": ..., "params": {...}}``
(schema in ``docs/config.md``).  A run writes one CSV per result table next to
``summary.json`` and ``manifest.json``.  Passing the manifest back as
``--config`` repeats the run with identical result files.

Exit codes: 0 success, 2 configuration error, 3 infeasible focusing design,
4 failed check.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .experiments import EXPERIMENTS, MI_ESTIMATORS
from .focusing import InfeasibleDesign

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_CHECK = 0, 2, 3, 4
LN2 = math.log(2.0)


class ConfigError(ValueError):
    """Invalid experiment configuration, optionally tagged with a line number."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


# --- value parsers ---------------------------------------------------------------


def _rational(v):
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise ValueError(f"expected an integer or a 'num/den' string, got {v!r}")
    try:
        return Fraction(v)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"cannot parse rational {v!r}") from None


def _num(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    return float(v)


def _pos(v):
    v = _num(v)
    if not v > 0:
        raise ValueError(f"expected a positive number, got {v!r}")
    return v


def _int(v, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError(f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ValueError(f"expected an integer >= {lo}, got {v!r}")
    return v


def _posint(v):
    return _int(v, 1)


def _bool(v):
    if not isinstance(v, bool):
        raise ValueError(f"expected true or false, got {v!r}")
    return v


def _list(item, nonempty=True):
    def parse(v):
        if not isinstance(v, list):
            raise ValueError(f"expected a list, got {v!r}")
        if nonempty and not v:
            raise ValueError("list must be nonempty")
        return tuple(item(x) for x in v)

    return parse


def _increasing(item):
    base = _list(item)

    def parse(v):
        out = base(v)
        if any(b <= a for a, b in zip(out, out[1:])):
            raise ValueError("grid must be strictly increasing")
        return out

    return parse


def _matrix(v):
    rows = _list(_list(_rational))(v)
    if any(len(r) != len(rows) for r in rows):
        raise ValueError("coupling matrix must be square")
    return rows


def _choice(*options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {list(options)}, got {v!r}")
        return v

    return parse


def _optional(item):
    return lambda v: None if v is None else item(v)


def _constellation(v):
    if isinstance(v, dict):
        return v
    raise ValueError("constellation must be an inline object or a file path string")


PARAMS = {
    "example-vd": {"h12": _rational, "h21": _rational, "P1": _pos, "P2": _pos, "N": _pos,
                   "a1": _optional(_posint), "a2": _optional(_posint)},
    "lcm-example": {"coupling": _matrix, "rule": _choice("lcm", "finest")},
    "focusing-design": {"coupling": _matrix, "P": _list(_pos), "N": _pos, "a_scale": _pos,
                        "a": _optional(_list(_posint)), "include_edges": _bool, "rule": _choice("lcm", "finest")},
    "waveform-verify": {"trials": _posint, "n": _posint, "S": _posint, "pairs": _list(_list(_posint)),
                        "method": _choice("closed", "quadrature"), "tol": _pos},
    "orthogonality": {"fmax": _posint, "S": _posint, "tol": _pos},
    "specfun-check": {"tol": _pos},
    "sandwich": {"snrs": _increasing(_pos), "tol": _pos},
    "prelog": {"estimator": _choice("one-ring-mc", "one-ring-lb", "multiring-lb", "awgn"), "snr_min": _pos,
               "snr_max": _pos, "points_per_decade": _posint, "N": _pos, "ring_unit": _rational, "a_scale": _pos,
               "trials": _posint, "slope_target": _optional(_num), "slope_tol": _optional(_pos)},
    "mi-sweep": {"snr_db": _increasing(_num), "N": _pos, "estimators": _list(_choice(*MI_ESTIMATORS)),
                 "trials": _posint, "ring_unit": _rational, "a_scale": _pos, "constellation": _constellation},
    "pe-check": {"Js": _list(_posint), "deltas": _list(_pos), "trials": _posint},
    "outer-bound": {"gamma": _list(_rational), "beta1": _list(_rational), "multiples": _list(_list(_posint)),
                    "N": _pos, "n": _posint, "codewords": _posint, "S": _posint},
    "ase-limit": {"N_spans": _posint, "alphaL": _pos, "tol": _pos},
}
SEEDED = {"waveform-verify", "prelog", "mi-sweep", "pe-check", "outer-bound"}
THREADED = {"prelog", "mi-sweep"}
TOP_KEYS = {"kind", "seed", "threads", "units", "params"}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    units: str = "nats"


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def validate_config(text, base_dir=None):
    """Parse and validate a JSON experiment config (or a run manifest).

    Rationals are written as integers or ``"num/den"`` strings; unknown keys
    are rejected.  A ``constellation`` given as a string is read as a JSON
    file relative to ``base_dir``.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", e.lineno) from None
    if isinstance(raw, dict) and "manifest_version" in raw:
        raw = raw.get("config")
        text = None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", _line_of(text, unknown[0]))
    kind = raw.get("kind")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {sorted(EXPERIMENTS)}",
                          _line_of(text, "kind"))
    schema = PARAMS[kind]
    params_raw = raw.get("params", {})
    if not isinstance(params_raw, dict):
        raise ConfigError("params must be an object", _line_of(text, "params"))
    params = {}
    for key, value in params_raw.items():
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for experiment {kind!r}", _line_of(text, key))
        if key == "constellation" and isinstance(value, str):
            path = Path(base_dir or ".") / value
            try:
                value = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read constellation file {value!r}: {e}", _line_of(text, key)) from None
        try:
            params[key] = schema[key](value)
        except ValueError as e:
            raise ConfigError(f"{key}: {e}", _line_of(text, key)) from None
    try:
        seed = _int(raw.get("seed", 0), 0)
        threads = _posint(raw.get("threads", 1))
        units = _choice("nats", "bits")(raw.get("units", "nats"))
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return ExperimentConfig(kind, params, seed, threads, units)


def _to_json(v):
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, (tuple, list)):
        return [_to_json(x) for x in v]
    if isinstance(v, dict):
        return {k: _to_json(x) for k, x in v.items()}
    return v


def config_to_dict(cfg):
    return {"kind": cfg.kind, "seed": cfg.seed, "threads": cfg.threads, "units": cfg.units,
            "params": {k: _to_json(v) for k, v in sorted(cfg.params.items())}}


def serialize_config(cfg):
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"


# --- output --------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _convert_rows(rows, rate_columns, units):
    if units == "nats":
        return rows
    out = []
    for r in rows:
        conv = {}
        for k, v in r.items():
            if k in rate_columns:
                conv[k.replace("_nats", "_bits")] = v / LN2
            else:
                conv[k] = v
        out.append(conv)
    return out


def write_csv(path, rows):
    cols = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r[c]) for c in cols) + "\n")


def _json_default(v):
    if isinstance(v, Fraction):
        return _to_json(v)
    if hasattr(v, "item"):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_experiment(cfg, out_dir, progress=None):
    """Run ``cfg`` and write its artifacts into ``out_dir``.

    Returns ``(exit_code, result)``; ``result`` is ``None`` on an infeasible
    design.
    """
    progress = progress or (lambda msg: None)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kwargs = dict(cfg.params)
    if cfg.kind in SEEDED:
        kwargs["seed"] = cfg.seed
    if cfg.kind in THREADED:
        kwargs["threads"] = cfg.threads
    start = time.perf_counter()
    try:
        result = EXPERIMENTS[cfg.kind](progress=progress, **kwargs)
    except InfeasibleDesign as e:
        progress(f"infeasible design: {e}")
        (out / "summary.json").write_text(json.dumps({"kind": cfg.kind, "infeasible": str(e)}, indent=2) + "\n")
        return EXIT_INFEASIBLE, None
    wall = time.perf_counter() - start
    files = []
    for name, rows in result.tables.items():
        path = out / f"{name}.csv"
        write_csv(path, _convert_rows(rows, result.rate_columns, cfg.units))
        files.append(path)
    summary = {"kind": result.kind, "passed": result.passed, **result.summary}
    spath = out / "summary.json"
    spath.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")
    files.append(spath)
    manifest = {
        "manifest_version": 1,
        "config": config_to_dict(cfg),
        "seed": cfg.seed,
        "library_version": __version__,
        "wall_time_s": wall,
        "files": {p.name: _sha256(p) for p in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    code = EXIT_CHECK if result.passed is False else EXIT_OK
    return code, result


def build_parser():
    ap = argparse.ArgumentParser(prog="xpmfocus", description="Run an interference-focusing experiment.")
    ap.add_argument("--config", required=True, help="experiment config or run manifest (JSON)")
    ap.add_argument("--out-dir", default="results", help="directory for CSV/JSON artifacts")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--threads", type=int, help="worker threads for Monte Carlo blocks")
    ap.add_argument("--units", choices=("nats", "bits"), help="rate units of the CSV output")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)

    def progress(msg):
        print(msg, file=sys.stderr, flush=True)

    try:
        text = Path(args.config).read_text()
        cfg = validate_config(text, base_dir=os.path.dirname(os.path.abspath(args.config)))
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = _int(args.seed, 0)
        if args.threads is not None:
            overrides["threads"] = _posint(args.threads)
        if args.units is not None:
            overrides["units"] = args.units
        if overrides:
            cfg = ExperimentConfig(**{**cfg.__dict__, **overrides})
        code, result = run_experiment(cfg, args.out_dir, progress)
    except (OSError, ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if result is not None:
        print(result.line())
    return code


if __name__ == "__main__":
    sys.exit(main())
