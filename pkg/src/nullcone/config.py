"""Strict JSON run configuration with materialized defaults and key-path errors."""

from __future__ import annotations

import copy
import json
import math

import numpy as np

from .background import BackgroundModel, model_from_dict
from .boost import boosted_profile
from .sphere import SphereGrid

TASKS = ("verify", "flow", "solve", "foliate")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# field schema: key -> (kind, default, check or None); kind in int | float | str | bool | list | dict | any
def _num(lo=None, hi=None, lo_open=False):
    def check(v):
        if lo is not None and (v <= lo if lo_open else v < lo):
            return f"must be {'>' if lo_open else '>='} {lo}"
        if hi is not None and v > hi:
            return f"must be <= {hi}"
        return None
    return check


def _choice(*opts):
    return lambda v: None if v in opts else f"must be one of {list(opts)}"


_MODEL = {
    "type": ("str", "schwarzschild", _choice("minkowski", "schwarzschild", "generalized")),
    "mass": ("float", None, _num(0.0)),
    "q_coeff": ("float", 0.0, None),
    "r_min": ("float?", None, _num(0.0, lo_open=True)),
}
_GRID = {"bandlimit": ("int", 16, _num(2, 128))}
_RANDOM = {
    "degree": ("int", 4, _num(1)),
    "amplitude": ("float", 0.1, _num(0.0)),
    "decay": ("float", 0.0, _num(0.0)),
}
_INITIAL = {
    "sigma": ("float", 20.0, _num(0.0, lo_open=True)),
    "perturbations": ("list", [], None),
    "random": ("dict?", None, None),
    "profile": ("str", "round", _choice("round", "boosted")),
    "rho": ("float?", None, _num(0.0, lo_open=True)),
    "a": ("list", [0.0, 0.0, 0.0], None),
}
_TASK_COMMON = {"kind": ("str", None, _choice(*TASKS))}
_TASK = {
    "verify": {
        "forms": ("list", ["gauss", "codazzi", "simon"], None),
        "gate_rel": ("float", 1e-8, _num(0.0, lo_open=True)),
    },
    "flow": {
        "cfl": ("float", 0.5, _num(0.0, 1.0, lo_open=True)),
        "tol": ("float", 1e-10, _num(0.0, lo_open=True)),
        "max_steps": ("int", 100000, _num(0)),
        "max_time": ("float?", None, _num(0.0, lo_open=True)),
        "snapshot_every": ("int", 0, _num(0)),
        "record_every": ("int", 100, _num(1)),
    },
    "solve": {
        "tol": ("float", 1e-11, _num(0.0, lo_open=True)),
        "max_iter": ("int", 20, _num(1)),
        "linear_tol": ("float", 1e-12, _num(0.0, lo_open=True)),
        "max_halvings": ("int", 8, _num(0)),
    },
    "foliate": {
        "sigma_min": ("float", 15.0, _num(0.0, lo_open=True)),
        "sigma_max": ("float", 30.0, _num(0.0, lo_open=True)),
        "dsigma": ("float", 1.0, _num(0.0, lo_open=True)),
        "method": ("str", "newton", _choice("flow", "newton")),
    },
}
_TOP = {
    "model": ("dict", None, None),
    "grid": ("dict", None, None),
    "initial": ("dict", None, None),
    "task": ("dict", None, None),
    "output": ("str?", None, None),
    "seed": ("int", 0, _num(0)),
}


def _typed(path: str, kind: str, v):
    base = kind.rstrip("?")
    if v is None:
        if kind.endswith("?"):
            return None
        raise ConfigError(path, "must not be null")
    if base == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(path, f"expected an integer, got {json.dumps(v)}")
        return v
    if base == "float":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(path, f"expected a number, got {json.dumps(v)}")
        if not math.isfinite(v):
            raise ConfigError(path, "must be finite")
        return float(v)
    if base == "str":
        if not isinstance(v, str):
            raise ConfigError(path, f"expected a string, got {json.dumps(v)}")
        return v
    if base == "list":
        if not isinstance(v, list):
            raise ConfigError(path, f"expected a list, got {json.dumps(v)}")
        return v
    if base == "dict":
        if not isinstance(v, dict):
            raise ConfigError(path, f"expected an object, got {json.dumps(v)}")
        return v
    raise AssertionError(kind)


def _block(path: str, raw, schema: dict) -> dict:
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    for key in sorted(raw):
        if key not in schema:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")
    out = {}
    for key, (kind, default, check) in schema.items():
        kp = f"{path}.{key}" if path else key
        v = _typed(kp, kind, raw[key]) if key in raw else copy.deepcopy(default)
        if v is not None and check is not None and kind.rstrip("?") in ("int", "float", "str"):
            msg = check(v)
            if msg:
                raise ConfigError(kp, msg)
        out[key] = v
    return out


def validate(raw: dict) -> dict:
    """Validate a decoded config and return a fully materialized copy."""
    if not isinstance(raw, dict):
        raise ConfigError("", "top level must be a JSON object")
    top = _block("", raw, _TOP)

    model = _block("model", top["model"], _MODEL)
    if model["mass"] is None:
        model["mass"] = 0.0 if model["type"] == "minkowski" else 1.0
    try:
        build_model(model)
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None

    grid = _block("grid", top["grid"], _GRID)
    L = grid["bandlimit"]

    init = _block("initial", top["initial"], _INITIAL)
    perts = []
    for i, p in enumerate(init["perturbations"]):
        kp = f"initial.perturbations[{i}]"
        if not (isinstance(p, list) and len(p) == 3):
            raise ConfigError(kp, "expected [l, m, amplitude]")
        l = _typed(kp + "[0]", "int", p[0])
        m = _typed(kp + "[1]", "int", p[1])
        amp = _typed(kp + "[2]", "float", p[2])
        if not (0 <= l <= L and abs(m) <= l):
            raise ConfigError(kp, f"need 0 <= l <= bandlimit={L} and |m| <= l")
        perts.append([l, m, amp])
    init["perturbations"] = perts
    if init["random"] is not None:
        init["random"] = _block("initial.random", init["random"], _RANDOM)
        if init["random"]["degree"] > L:
            raise ConfigError("initial.random.degree", f"must be <= bandlimit={L}")
    if len(init["a"]) != 3:
        raise ConfigError("initial.a", "expected three components")
    init["a"] = [_typed(f"initial.a[{i}]", "float", v) for i, v in enumerate(init["a"])]
    if init["profile"] == "round" and (init["rho"] is not None or any(init["a"])):
        raise ConfigError("initial.profile", "rho and a require profile 'boosted'")

    traw = top["task"]
    if traw is None or "kind" not in traw:
        raise ConfigError("task.kind", "required")
    kind = _block("task", {"kind": traw["kind"]}, _TASK_COMMON)["kind"]
    task = _block("task", traw, {**_TASK_COMMON, **_TASK[kind]})
    if kind == "verify":
        for i, f in enumerate(task["forms"]):
            if f not in ("gauss", "codazzi", "simon"):
                raise ConfigError(f"task.forms[{i}]", "must be one of ['gauss', 'codazzi', 'simon']")
        if not task["forms"] or len(set(task["forms"])) != len(task["forms"]):
            raise ConfigError("task.forms", "must be a non-empty list without repeats")
    if kind == "foliate" and task["sigma_max"] < task["sigma_min"]:
        raise ConfigError("task.sigma_max", "must be >= task.sigma_min")

    return {"model": model, "grid": grid, "initial": init, "task": task,
            "output": top["output"], "seed": top["seed"]}


def parse_config(text: str) -> dict:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"JSON syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return validate(raw)


def serialize_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True)


def build_model(block: dict) -> BackgroundModel:
    return model_from_dict(block)


def build_initial(cfg: dict, grid: SphereGrid, sigma: float | None = None) -> np.ndarray:
    """Initial graph: constant or boosted profile plus harmonic and seeded random terms.

    ``sigma`` overrides the base radius (``rho`` for boosted profiles, else ``sigma``).
    """
    init = cfg["initial"]
    if sigma is not None:
        s = sigma
    elif init["profile"] == "boosted" and init["rho"] is not None:
        s = init["rho"]
    else:
        s = init["sigma"]
    if init["profile"] == "boosted":
        omega = boosted_profile(grid, s, init["a"])
    else:
        omega = np.full(grid.shape, s)
    for l, m, amp in init["perturbations"]:
        omega = omega + amp * grid.ylm(l, m)
    r = init["random"]
    if r is not None:
        rng = np.random.default_rng(cfg["seed"])
        omega = omega + grid.random_field(rng, r["degree"], r["amplitude"], r["decay"])
    return omega
