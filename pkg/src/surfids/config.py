"""Experiment configuration: TOML files checked against a fixed schema.

Unknown keys are rejected, every problem is reported with its dotted path,
and the resolved configuration has a stable digest that names the output
directory.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import ConfigInvalid

__all__ = ["SCHEMA", "load_config", "parse_config", "resolve", "digest", "manifest_text",
           "energy_grid"]

_REQUIRED = object()


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _pos(v):
    return _num(v) and v > 0


def _nonneg(v):
    return _num(v) and v >= 0


def _int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _posint(v):
    return _int(v) and v > 0


def _u64(v):
    return _int(v) and 0 <= v < 2**64


def _matrix(v):
    return (isinstance(v, list) and v and all(isinstance(r, list) and len(r) == len(v) for r in v)
            and all(_num(x) for r in v for x in r))


def _numlist(v):
    return isinstance(v, list) and all(_num(x) for x in v)


def _poslist(v):
    return isinstance(v, list) and v and all(_pos(x) for x in v)


def _grid(v):
    if _numlist(v):
        return len(v) > 0
    return (isinstance(v, dict) and set(v) == {"start", "stop", "num"} and _num(v["start"])
            and _num(v["stop"]) and _posint(v["num"]))


def _one_of(*opts):
    f = lambda v: v in opts
    f.__doc__ = "one of " + ", ".join(repr(o) for o in opts)
    return f


def _str(v):
    return isinstance(v, str)


def _window(v):
    return isinstance(v, list) and len(v) == 2 and all(_pos(x) for x in v) and v[0] < v[1]


def _strlist(opts):
    f = lambda v: isinstance(v, list) and all(x in opts for x in v)
    f.__doc__ = "list drawn from " + ", ".join(repr(o) for o in opts)
    return f


# section -> key -> (validator, default, description)
SCHEMA = {
    "model": {
        "B": (_matrix, None, "field matrix (antisymmetric, canonical block form for b != 0)"),
        "b": (_poslist, None, "field frequencies b_1 >= ... >= b_m > 0 (alternative to B)"),
        "n": (lambda v: _int(v) and v >= 0, 0, "number of field-free transverse directions"),
        "shift": (_one_of("continuum", "lattice"), "continuum", "diagonal shift of H_perp"),
    },
    "model.parallel": {
        "kind": (_one_of("levels", "delta", "harmonic", "poschl_teller", "square_well"),
                 _REQUIRED, "longitudinal model"),
        "levels": (_numlist, None, "explicit eigenvalues (kind = levels)"),
        "essential_floor": (_num, None, "essential floor for explicit levels"),
        "alpha": (_pos, None, "delta-well strength"),
        "omega": (_pos, 1.0, "harmonic frequency"),
        "s": (_pos, None, "Poschl-Teller depth parameter"),
        "depth": (_pos, None, "square-well depth"),
        "half_width": (_pos, None, "square-well half width"),
        "count": (_posint, 1, "number of bound states kept"),
        "Y": (_pos, 20.0, "half length of the longitudinal box"),
        "hy": (_pos, 0.05, "longitudinal grid spacing"),
    },
    "model.profile": {
        "kind": (_one_of("compact", "gaussian", "power"), _REQUIRED, "single-site profile"),
        "amplitude": (_nonneg, 1.0, "profile amplitude"),
        "side": (_pos, 1.0, "cube side (compact)"),
        "rate": (_pos, 1.0, "decay rate (gaussian)"),
        "beta": (_pos, 2.0, "decay power (gaussian)"),
        "kappa": (_pos, None, "decay exponent (power)"),
        "longitudinal": (_one_of("constant", "indicator", "gaussian"), "constant",
                         "longitudinal factor g(y)"),
        "width": (_pos, 1.0, "width of g"),
        "center": (_num, 0.0, "center of g"),
    },
    "model.coupling": {
        "law": (_one_of("uniform", "power"), "uniform", "coupling distribution"),
        "E0": (_pos, 1.0, "upper end of the support"),
        "kappa": (_pos, 1.0, "vanishing order at 0 (power law)"),
    },
    "numerics": {
        "L": (_poslist, _REQUIRED, "ladder of window side lengths"),
        "h": (_pos, _REQUIRED, "transverse grid spacing"),
        "energies": (_grid, None, "energy grid: list or {start, stop, num}"),
        "n_realizations": (_posint, 1, "realizations per estimate"),
        "seed": (_u64, 0, "base seed"),
        "dense_cap": (_posint, 4000, "largest dimension solved densely"),
        "max_dim": (_posint, 200000, "largest assembled dimension"),
        "halo": (_nonneg, None, "lattice-sum halo (default from tail_tol)"),
        "tail_tol": (_pos, 1e-6, "lattice-sum tail tolerance relative to E0"),
        "threads": (_posint, 1, "worker threads"),
        "max_seconds": (_pos, None, "wall-clock guard"),
    },
    "study": {
        "checks": (_strlist(("global", "finite", "ground", "internal", "plateau")), ["global"],
                   "sandwich checks to run"),
        "j": (_posint, 1, "bound-state index"),
        "lambda_star": (_pos, None, "upper end of the lambda range"),
        "lambdas": (_grid, None, "lambda grid"),
        "delta": (_num, None, "ground-edge delta"),
        "delta_minus": (_num, None, "internal-edge delta_-"),
        "delta_plus": (_num, None, "internal-edge delta_+"),
        "stat_tol": (_nonneg, 2.0, "allowed standard errors"),
        "abs_tol": (_nonneg, 0.0, "allowed absolute finite-size error"),
        "plateau_tol": (_pos, 0.1, "relative tolerance of the plateau value"),
    },
    "fit": {
        "curve": (_str, None, "EmpiricalCurve CSV to fit"),
        "edge": (_num, 0.0, "lambda = E - edge"),
        "baseline": (_num, 0.0, "subtracted from the curve values"),
        "synthetic": (_one_of("power", "log"), None, "synthetic curve y = exp(-c lam^p) or exp(-c |ln lam|^p)"),
        "exponent": (_num, None, "synthetic exponent p"),
        "c": (_pos, 1.0, "synthetic constant c"),
        "axis": (_one_of("log", "loglog"), "log", "abscissa"),
        "window": (_window, None, "lambda window [min, max]"),
    },
}

_OPTIONAL_SECTIONS = {"model.profile", "model.coupling", "study", "fit"}


def _flatten(raw, problems):
    """Split the nested TOML table into schema sections."""
    out = {}
    if not isinstance(raw, dict):
        problems.append("<root>: expected a table")
        return out
    for top, val in raw.items():
        if top not in ("model", "numerics", "study", "fit"):
            problems.append(f"{top}: unknown section")
            continue
        if not isinstance(val, dict):
            problems.append(f"{top}: expected a table")
            continue
        sect = out.setdefault(top, {})
        for k, v in val.items():
            name = f"{top}.{k}"
            if name in SCHEMA:
                if not isinstance(v, dict):
                    problems.append(f"{name}: expected a table")
                else:
                    out[name] = dict(v)
            else:
                sect[k] = v
    return out


def parse_config(raw: dict) -> dict:
    """Validate a raw nested mapping and fill defaults; raises :class:`ConfigInvalid`."""
    problems = []
    flat = _flatten(copy.deepcopy(raw), problems)
    cfg = {}
    for sect, fields in SCHEMA.items():
        given = flat.get(sect)
        if given is None and sect in _OPTIONAL_SECTIONS and sect != "study":
            cfg[sect] = None
            continue
        given = given or {}
        for k in given:
            if k not in fields:
                problems.append(f"{sect}.{k}: unknown key")
        out = {}
        for k, (check, default, _) in fields.items():
            if k in given:
                if not check(given[k]):
                    what = check.__doc__ or check.__name__.strip("_")
                    problems.append(f"{sect}.{k}: invalid value {given[k]!r} ({what})")
                out[k] = given[k]
            elif default is _REQUIRED:
                problems.append(f"{sect}.{k}: required")
            else:
                out[k] = copy.deepcopy(default)
        cfg[sect] = out
    if not problems:
        _cross_checks(cfg, problems)
    if problems:
        raise ConfigInvalid(problems)
    return cfg


def _cross_checks(cfg, problems):
    m = cfg["model"]
    if (m["B"] is None) == (m["b"] is None):
        problems.append("model: give exactly one of B or b")
    if m["B"] is not None:
        B = np.asarray(m["B"], dtype=float)
        if np.abs(B + B.T).max() > 1e-12 * max(1.0, np.abs(B).max()):
            problems.append("model.B: not antisymmetric")
    par = cfg["model.parallel"]
    need = {"levels": ["levels"], "delta": ["alpha"], "poschl_teller": ["s"],
            "square_well": ["depth", "half_width"], "harmonic": []}[par["kind"]]
    for k in need:
        if par[k] is None:
            problems.append(f"model.parallel.{k}: required for kind = {par['kind']!r}")
    prof = cfg["model.profile"]
    if prof is not None and prof["kind"] == "power" and prof["kappa"] is None:
        problems.append("model.profile.kappa: required for kind = 'power'")
    coup = cfg["model.coupling"]
    if coup is not None and coup["law"] == "uniform" and coup["kappa"] != 1.0:
        problems.append("model.coupling.kappa: must be 1 for the uniform law")
    fit = cfg["fit"]
    if fit is not None:
        if (fit["curve"] is None) == (fit["synthetic"] is None):
            problems.append("fit: give exactly one of curve or synthetic")
        if fit["synthetic"] is not None and fit["exponent"] is None:
            problems.append("fit.exponent: required for a synthetic curve")


def load_config(path, seed: int | None = None) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid([f"{path}: {exc}"]) from exc
    except OSError as exc:
        raise ConfigInvalid([f"{path}: {exc.strerror}"]) from exc
    return resolve(parse_config(raw), seed)


def resolve(cfg: dict, seed: int | None = None) -> dict:
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        if not _u64(seed):
            raise ConfigInvalid([f"--seed: {seed!r} is not an unsigned 64-bit integer"])
        cfg["numerics"]["seed"] = seed
    return cfg


def _canonical(cfg) -> dict:
    out = copy.deepcopy(cfg)
    if out.get("numerics"):
        out["numerics"].pop("threads", None)
    return out


def digest(cfg: dict) -> str:
    text = json.dumps(_canonical(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def manifest_text(cfg: dict, command: str, fmt: str) -> str:
    lines = [f"command = {command}", f"format = {fmt}", f"digest = {digest(cfg)}"]

    def walk(prefix, v):
        if isinstance(v, dict):
            for k in sorted(v):
                walk(f"{prefix}.{k}" if prefix else k, v[k])
        else:
            lines.append(f"{prefix} = {json.dumps(v)}")

    walk("", _canonical(cfg))
    return "\n".join(lines) + "\n"


def energy_grid(spec) -> np.ndarray:
    if isinstance(spec, dict):
        return np.linspace(spec["start"], spec["stop"], spec["num"])
    return np.sort(np.asarray(spec, dtype=float))
