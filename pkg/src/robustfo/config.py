"""JSON scenario configuration: schema, validation, hashing and object builders.

A configuration is one JSON document with up to five sections: ``plant``,
``signals``, ``controller``, ``uncertainty`` and ``experiment``.  Validation
errors carry the JSON path of the offending field and, when it can be found,
its line in the source file.
"""

import hashlib
import json
import math
import re

import numpy as np
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from .analysis import max_step_size
from .closed_loop import CONTROLLER, NOMINAL, Scenario
from .controllers import VARIANTS, make_config
from .errors import ConfigError, RobustFOError
from .feeder import FeederSpec
from .plant import (LtiPlant, SignalSchedule, aggregate_disturbance, plant_with_sensitivity,
                    random_plant, sensitivity)
from .problems import EXACT, RobustProblem, exact_regularizer
from .uncertainty import COL, GEN, UncertaintySet, perturb_dirichlet, perturb_uniform

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_MAT = {"type": "array", "items": {"type": "array", "items": _NUM}, "minItems": 1}
_SEEDS = {
    "oneOf": [
        {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        {"type": "object", "required": ["count"], "additionalProperties": False,
         "properties": {"start": {"type": "integer", "minimum": 0},
                        "count": {"type": "integer", "minimum": 1}}},
    ]
}
_SIGNAL = {
    "oneOf": [
        _VEC,
        _MAT,
        {"type": "object", "required": ["offset"], "additionalProperties": False,
         "properties": {"offset": _VEC, "amplitude": _VEC,
                        "period": {"type": "number", "exclusiveMinimum": 0},
                        "phase": _NUM}},
    ]
}
_WEIGHT = {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, _MAT]}


def _when(key, value, then):
    return {"if": {"properties": {key: {"const": value}}, "required": [key]}, "then": then}


PLANT_KINDS = ("lti", "random", "sensitivity", "feeder")

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "plant": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": list(PLANT_KINDS)}},
            "allOf": [
                _when("kind", "lti", {"required": ["A", "B", "C"], "additionalProperties": False,
                                      "properties": {"kind": {}, "A": _MAT, "B": _MAT,
                                                     "C": _MAT}}),
                _when("kind", "random", {
                    "required": ["n", "m", "p"], "additionalProperties": False,
                    "properties": {"kind": {}, "n": {"type": "integer", "minimum": 1},
                                   "m": {"type": "integer", "minimum": 1},
                                   "p": {"type": "integer", "minimum": 1},
                                   "seed": {"type": "integer", "minimum": 0},
                                   "spectral_radius_max": {"type": "number",
                                                           "exclusiveMinimum": 0,
                                                           "exclusiveMaximum": 1}}}),
                _when("kind", "sensitivity", {"required": ["H"], "additionalProperties": False,
                                              "properties": {"kind": {}, "H": _MAT,
                                                             "A": _MAT}}),
                _when("kind", "feeder", {
                    "additionalProperties": False,
                    "properties": {"kind": {},
                                   "n_b": {"type": "integer", "minimum": 2},
                                   "n_pv": {"type": "integer", "minimum": 1},
                                   "seed": {"type": "integer", "minimum": 0},
                                   "horizon": {"type": "integer", "minimum": 1},
                                   "mpp_peak": {"type": "number", "minimum": 0},
                                   "load_peak": {"type": "number", "minimum": 0},
                                   "q_limit": {"type": "number", "minimum": 0},
                                   "r_range": {"type": "array", "items": _NUM,
                                               "minItems": 2, "maxItems": 2},
                                   "xr_range": {"type": "array", "items": _NUM,
                                                "minItems": 2, "maxItems": 2}}}),
            ],
        },
        "signals": {
            "type": "object",
            "required": ["horizon"],
            "additionalProperties": False,
            "properties": {"horizon": {"type": "integer", "minimum": 1},
                           "d_x": _SIGNAL, "d_y": _SIGNAL, "r": _SIGNAL},
        },
        "controller": {
            "type": "object",
            "required": ["variant", "eta"],
            "additionalProperties": False,
            "properties": {
                "variant": {"enum": list(VARIANTS)},
                "eta": {"oneOf": [
                    {"type": "number", "exclusiveMinimum": 0},
                    {"type": "object", "required": ["fraction_of_max"],
                     "additionalProperties": False,
                     "properties": {"fraction_of_max": {"type": "number",
                                                        "exclusiveMinimum": 0}}},
                ]},
                "R": _WEIGHT,
                "Q": _WEIGHT,
                "lam": {"type": "number", "exclusiveMinimum": 0},
                "rho": {"oneOf": [{"type": "number", "minimum": 0},
                                  {"type": "array", "items": {"type": "number", "minimum": 0}},
                                  {"const": "exact"}]},
                "box": {"type": "object", "required": ["lo", "hi"], "additionalProperties": False,
                        "properties": {"lo": _VEC, "hi": _VEC}},
            },
        },
        "uncertainty": {
            "type": "object",
            "required": ["model"],
            "properties": {"model": {"enum": ["exact", "uniform", "dirichlet", "relative",
                                              "explicit"]}},
            "allOf": [
                {"properties": {"set": {
                    "type": "object", "required": ["kind", "radius"],
                    "additionalProperties": False,
                    "properties": {"kind": {"enum": [GEN, COL]},
                                   "radius": {"oneOf": [{"type": "number", "minimum": 0},
                                                        _VEC]}}}}},
                _when("model", "exact", {"additionalProperties": False,
                                         "properties": {"model": {}, "set": {}}}),
                _when("model", "uniform", {
                    "required": ["sigma"], "additionalProperties": False,
                    "properties": {"model": {}, "set": {},
                                   "sigma": {"type": "number", "minimum": 0},
                                   "seed": {"type": "integer", "minimum": 0}}}),
                _when("model", "dirichlet", {
                    "additionalProperties": False,
                    "properties": {"model": {}, "set": {},
                                   "seed": {"type": "integer", "minimum": 0}}}),
                _when("model", "relative", {
                    "required": ["level"], "additionalProperties": False,
                    "properties": {"model": {}, "set": {},
                                   "level": {"type": "number", "minimum": 0},
                                   "seed": {"type": "integer", "minimum": 0}}}),
                _when("model", "explicit", {
                    "required": ["H_hat"], "additionalProperties": False,
                    "properties": {"model": {}, "set": {}, "H_hat": _MAT}}),
            ],
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "target": {"enum": [CONTROLLER, NOMINAL]},
                "x0": _VEC,
                "u0": _VEC,
                "form": {"enum": ["telescoped", "printed"]},
                "sigmas": {"type": "array", "items": {"type": "number", "minimum": 0},
                           "minItems": 1},
                "dims": {"type": "array",
                         "items": {"type": "integer", "minimum": 1, "maximum": 16},
                         "minItems": 1},
                "seeds": _SEEDS,
                "m": {"type": "integer", "minimum": 1},
                "lam": {"type": "number", "exclusiveMinimum": 0},
                "horizon": {"type": "integer", "minimum": 1},
                "eta": {"type": "number", "exclusiveMinimum": 0},
                "eta_factor": {"type": "number", "exclusiveMinimum": 0},
                "new_pcc": {"type": "integer", "minimum": 0},
                "rho": {"type": "number", "minimum": 0},
                "n_samples": {"type": "integer", "minimum": 1},
                "history_seed": {"type": "integer", "minimum": 0},
                "v_ref": {"type": "number"},
            },
        },
    },
}

_VALIDATOR = Draft202012Validator(SCHEMA)


# ---------------------------------------------------------------------------
# loading and hashing

def _json_path(parts):
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _find_line(text, parts):
    """Best-effort line number of the last key in ``parts``."""
    pos = 0
    line = None
    for part in parts:
        if isinstance(part, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(part))).search(text, pos)
        if m is None:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


def validate(cfg, text=None):
    """Schema check; raises :class:`ConfigError` naming the offending field."""
    err = best_match(_VALIDATOR.iter_errors(cfg))
    if err is None:
        return cfg
    parts = list(err.absolute_path)
    message = err.message
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            parts.append(missing[0])
            message = "missing required field"
    line = _find_line(text, parts) if text is not None else None
    raise ConfigError(_json_path(parts), message, line)


def loads(text):
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", exc.msg, exc.lineno) from None
    return validate(cfg, text)


def load(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("$", f"cannot read {path}: {exc.strerror}") from None
    return loads(text)


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg):
    """SHA-256 of the canonical JSON text."""
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def apply_seed_offset(cfg, offset):
    """Copy of ``cfg`` with every seed shifted by ``offset``."""
    if not offset:
        return json.loads(json.dumps(cfg))

    def shift(node, key=None):
        if isinstance(node, dict):
            if key == "seeds" and "count" in node:
                out = dict(node)
                out["start"] = node.get("start", 0) + offset
                return out
            return {k: shift(v, k) for k, v in node.items()}
        if isinstance(node, list):
            if key == "seeds":
                return [s + offset for s in node]
            return [shift(v) for v in node]
        if key in ("seed", "history_seed") and isinstance(node, int):
            return node + offset
        return node

    return shift(cfg)


def seed_list(spec, default=range(20)):
    if spec is None:
        return list(default)
    if isinstance(spec, dict):
        start = spec.get("start", 0)
        return list(range(start, start + spec["count"]))
    return list(spec)


def _format_float(v):
    if math.isnan(v) or math.isinf(v):
        return "null"
    if v == int(v) and abs(v) < 1e16:
        return format(v, ".1f")
    return format(v, ".17g")


def dumps(obj, indent=0):
    """JSON text with every float written to 17 significant digits.

    Non-finite floats become ``null``.  Key order is sorted so the output is
    byte-stable.
    """
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(obj[k], indent + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        return "[" + ", ".join(dumps(v, indent + 1) for v in seq) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def dump(obj, path):
    with open(path, "w") as fh:
        fh.write(dumps(obj) + "\n")


# ---------------------------------------------------------------------------
# builders

def _section(cfg, name):
    return cfg.get(name, {})


def _fail(path, exc):
    raise ConfigError(path, str(exc)) from exc


def build_plant(cfg):
    """The configured LTI plant (feeder configs are handled by the grid command)."""
    spec = cfg.get("plant")
    if spec is None:
        raise ConfigError("$.plant", "missing required field")
    kind = spec["kind"]
    try:
        if kind == "lti":
            return LtiPlant(np.array(spec["A"], float), np.array(spec["B"], float),
                            np.array(spec["C"], float))
        if kind == "random":
            rng = np.random.default_rng(spec.get("seed", 0))
            return random_plant(spec["n"], spec["m"], spec["p"], rng,
                                spec.get("spectral_radius_max", 0.9))
        if kind == "sensitivity":
            A = np.array(spec["A"], float) if "A" in spec else None
            return plant_with_sensitivity(np.array(spec["H"], float), A)
    except RobustFOError as exc:
        _fail("$.plant", exc)
    raise ConfigError("$.plant.kind", f"plant kind {kind!r} is not a closed-loop plant here")


def feeder_spec(cfg):
    spec = dict(_section(cfg, "plant"))
    if spec.get("kind") != "feeder":
        raise ConfigError("$.plant.kind", "the grid command needs a feeder plant")
    spec.pop("kind")
    for key in ("r_range", "xr_range"):
        if key in spec:
            spec[key] = tuple(spec[key])
    return FeederSpec(**spec)


def _signal(value, K, dim, path):
    if value is None:
        return np.zeros((K, dim))
    if isinstance(value, dict):
        off = np.array(value["offset"], float)
        amp = np.array(value.get("amplitude", np.zeros_like(off)), float)
        if off.shape != (dim,) or amp.shape != (dim,):
            raise ConfigError(path, f"offset and amplitude need length {dim}")
        period = value.get("period", K)
        k = np.arange(K)[:, None]
        return off + amp * np.sin(2 * np.pi * k / period + value.get("phase", 0.0))
    arr = np.array(value, float)
    if arr.ndim == 1:
        if arr.shape != (dim,):
            raise ConfigError(path, f"expected length {dim}, got {arr.shape[0]}")
        return np.tile(arr, (K, 1))
    if arr.shape != (K, dim):
        raise ConfigError(path, f"expected a {K}x{dim} array, got {arr.shape[0]}x{arr.shape[1]}")
    return arr


def build_signals(cfg, plant):
    spec = cfg.get("signals")
    if spec is None:
        raise ConfigError("$.signals", "missing required field")
    K = spec["horizon"]
    return SignalSchedule(_signal(spec.get("d_x"), K, plant.n, "$.signals.d_x"),
                          _signal(spec.get("d_y"), K, plant.p, "$.signals.d_y"),
                          _signal(spec.get("r"), K, plant.p, "$.signals.r"))


def build_H_hat(cfg, H):
    spec = cfg.get("uncertainty", {"model": "exact"})
    model = spec["model"]
    seed = spec.get("seed", 0)
    if model == "exact":
        return H.copy()
    if model == "uniform":
        return perturb_uniform(H, spec["sigma"], seed)
    if model == "dirichlet":
        if H.shape[0] != H.shape[1]:
            raise ConfigError("$.uncertainty.model", "dirichlet needs a square sensitivity")
        return perturb_dirichlet(H, seed)
    if model == "relative":
        rng = np.random.default_rng(seed)
        return H * (1.0 + spec["level"] * rng.uniform(-1.0, 1.0, H.shape))
    H_hat = np.array(spec["H_hat"], float)
    if H_hat.shape != H.shape:
        raise ConfigError("$.uncertainty.H_hat", f"expected shape {H.shape}, got {H_hat.shape}")
    return H_hat


def _weight(value, dim, path):
    if value is None:
        return np.eye(dim)
    if isinstance(value, (int, float)):
        return float(value) * np.eye(dim)
    W = np.array(value, float)
    if W.shape != (dim, dim):
        raise ConfigError(path, f"expected a {dim}x{dim} matrix")
    return W


def uncertainty_set(cfg):
    spec = cfg.get("uncertainty", {}).get("set")
    if spec is None:
        return None
    radius = spec["radius"]
    return UncertaintySet(spec["kind"], np.array(radius, float) if isinstance(radius, list)
                          else float(radius))


def build_controller(cfg, plant, H_hat, signals, resolve_eta=True):
    """Controller config; ``eta = {"fraction_of_max": f}`` becomes ``f * eta*``."""
    spec = cfg.get("controller")
    if spec is None:
        raise ConfigError("$.controller", "missing required field")
    m, p = plant.m, plant.p
    R = _weight(spec.get("R"), m, "$.controller.R")
    Q = _weight(spec.get("Q"), p, "$.controller.Q")
    lam = spec.get("lam", 1.0)
    rho = spec.get("rho")
    box = None
    if "box" in spec:
        box = (np.array(spec["box"]["lo"], float), np.array(spec["box"]["hi"], float))
    try:
        if rho == "exact":
            uset = uncertainty_set(cfg)
            if uset is None:
                raise ConfigError("$.uncertainty.set", "rho = exact needs an uncertainty set")
            problem = RobustProblem(R, Q, lam, H_hat, uset=uset, reg_mode=EXACT)
            reg = exact_regularizer(problem, signals.d_y[0] if plant.n == 0 else
                                    _first_disturbance(plant, signals), signals.r[0])
            rho = reg.rho
        elif isinstance(rho, list):
            rho = np.array(rho, float)
        eta = spec["eta"]
        ctl = make_config(spec["variant"], 1.0 if isinstance(eta, dict) else eta,
                          R, Q, lam, H_hat, rho=rho, box=box)
        if isinstance(eta, dict) and resolve_eta:
            ctl = ctl.with_eta(eta["fraction_of_max"] * max_step_size(plant, ctl))
    except ConfigError:
        raise
    except RobustFOError as exc:
        _fail("$.controller", exc)
    return ctl


def _first_disturbance(plant, signals):
    return aggregate_disturbance(plant, signals.d_x[0], signals.d_y[0])


def _initial(cfg, key, dim):
    value = _section(cfg, "experiment").get(key)
    if value is None:
        return np.zeros(dim)
    v = np.array(value, float)
    if v.shape != (dim,):
        raise ConfigError(f"$.experiment.{key}", f"expected length {dim}")
    return v


def build_scenario(cfg):
    """Plant, schedule, controller and initial conditions of a ``run`` config."""
    plant = build_plant(cfg)
    H = sensitivity(plant)
    H_hat = build_H_hat(cfg, H)
    signals = build_signals(cfg, plant)
    ctl = build_controller(cfg, plant, H_hat, signals)
    exp = _section(cfg, "experiment")
    return Scenario(plant, signals, ctl, x0=_initial(cfg, "x0", plant.n),
                    u0=_initial(cfg, "u0", plant.m), H_true=H,
                    target=exp.get("target", CONTROLLER))

