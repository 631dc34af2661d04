"""JSON analysis configs: schema validation, dimension checks and parsing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .dynamics import LtvSystem
from .errors import ConfigInvalid
from .forward import ReachSpec, Solver
from .nn import FeedforwardNetwork, Layer
from .partition import PartitionConfig
from .sets import Box, HPolytope, LpBall, StateSet

_num = {"type": "number"}
_vector = {"type": "array", "items": _num, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}
_interval = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_supports = {"type": "array", "items": _interval, "minItems": 1}

_set_schema = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["box", "polytope", "ball"]},
        "lo": _vector,
        "hi": _vector,
        "A": _matrix,
        "b": _vector,
        "center": _vector,
        "radius": {"oneOf": [_num, _vector]},
        "p": {"oneOf": [{"type": "number", "minimum": 1}, {"const": "inf"}]},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "box"}}}, "then": {"required": ["lo", "hi"]}},
        {"if": {"properties": {"kind": {"const": "polytope"}}}, "then": {"required": ["A", "b"]}},
        {"if": {"properties": {"kind": {"const": "ball"}}}, "then": {"required": ["center", "radius"]}},
    ],
}

_system_schema = {
    "type": "object",
    "required": ["A", "B"],
    "properties": {
        "A": _matrix,
        "B": _matrix,
        "C": _matrix,
        "c": _vector,
        "omega": _supports,
        "nu": _supports,
        "u_limits": _supports,
        "dt": _num,
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["system", "network", "set", "analysis"],
    "properties": {
        "system": {"oneOf": [_system_schema, {"type": "array", "items": _system_schema, "minItems": 1}]},
        "network": {
            "type": "object",
            "required": ["layers"],
            "properties": {
                "layers": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["W", "b"],
                        "properties": {
                            "W": _matrix,
                            "b": _vector,
                            "activation": {"enum": ["relu", "identity"]},
                        },
                        "additionalProperties": False,
                    },
                }
            },
        },
        "set": _set_schema,
        "analysis": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["forward", "backward", "verify"]},
                "horizon": {"type": "integer", "minimum": 1},
                "partitioner": {
                    "type": "object",
                    "properties": {
                        "strategy": {"enum": ["none", "uniform", "greedy"]},
                        "cells": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                        "budget": {"type": "integer", "minimum": 1},
                    },
                    "additionalProperties": False,
                },
                "solver": {"enum": ["closed-form", "lp"]},
                "bounds": {"enum": ["crown", "interval"]},
                "facets": {"oneOf": [{"const": "identity"}, _matrix]},
                "seed": {"type": "integer"},
                "jobs": {"type": "integer", "minimum": 1},
                "mc_samples": {"type": "integer", "minimum": 2},
                "goal": _set_schema,
                "avoid": {
                    "type": "array",
                    "items": {"oneOf": [_set_schema, {"type": "array", "items": _set_schema}]},
                },
            },
            "additionalProperties": False,
        },
    },
}


@dataclass
class AnalysisConfig:
    systems: list[LtvSystem]
    net: FeedforwardNetwork
    set: StateSet
    mode: str = "forward"
    horizon: int = 1
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    spec: ReachSpec = field(default_factory=ReachSpec)
    goal: StateSet | None = None
    avoid: list = field(default_factory=list)  # per-timestep lists, or one shared list
    avoid_per_step: bool = False
    raw: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.partition.seed


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def validate(doc: dict) -> None:
    """Schema check followed by cross-field dimension checks; raises ConfigInvalid."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.path), list(map(str, e.path))))
    if errors:
        e = errors[0]
        raise ConfigInvalid(_path(e.absolute_path) or "<root>", e.message)
    _check_finite(doc, [])
    _check_dims(doc)


def _check_finite(node, parts):
    if isinstance(node, dict):
        for k, v in node.items():
            _check_finite(v, parts + [k])
    elif isinstance(node, list):
        for i, v in enumerate(node):
            _check_finite(v, parts + [i])
    elif isinstance(node, float) and not np.isfinite(node):
        raise ConfigInvalid(_path(parts), "values must be finite")


def _shape(M) -> tuple[int, int]:
    rows = {len(r) for r in M}
    if len(rows) != 1:
        raise ValueError("ragged matrix")
    return len(M), rows.pop()


def _matrix_shape(M, where: str) -> tuple[int, int]:
    try:
        return _shape(M)
    except ValueError:
        raise ConfigInvalid(where, "rows have unequal length") from None


def _expect(cond: bool, where: str, msg: str):
    if not cond:
        raise ConfigInvalid(where, msg)


def _check_set(s: dict, n: int, where: str):
    kind = s["kind"]
    if kind == "box":
        _expect(len(s["lo"]) == n, f"{where}.lo", f"expected {n} entries, got {len(s['lo'])}")
        _expect(len(s["hi"]) == n, f"{where}.hi", f"expected {n} entries, got {len(s['hi'])}")
        bad = [k for k in range(n) if s["lo"][k] > s["hi"][k]]
        _expect(not bad, f"{where}.lo", f"lo exceeds hi at indices {bad}")
    elif kind == "polytope":
        m, cols = _matrix_shape(s["A"], f"{where}.A")
        _expect(cols == n, f"{where}.A", f"expected {n} columns, got {cols}")
        _expect(len(s["b"]) == m, f"{where}.b", f"expected {m} entries, got {len(s['b'])}")
    else:
        _expect(len(s["center"]) == n, f"{where}.center", f"expected {n} entries, got {len(s['center'])}")
        r = s["radius"]
        if isinstance(r, list):
            _expect(len(r) == n, f"{where}.radius", f"expected {n} entries, got {len(r)}")
            _expect(min(r) >= 0, f"{where}.radius", "radius must be non-negative")
        else:
            _expect(r >= 0, f"{where}.radius", "radius must be non-negative")


def _check_supports(sup, n: int, where: str):
    _expect(len(sup) == n, where, f"expected {n} [lo, hi] pairs, got {len(sup)}")
    bad = [k for k, (lo, hi) in enumerate(sup) if lo > hi]
    _expect(not bad, where, f"lo exceeds hi at indices {bad}")


def _check_dims(doc: dict):
    systems = doc["system"] if isinstance(doc["system"], list) else [doc["system"]]
    prefix = (lambda i: f"system[{i}]") if isinstance(doc["system"], list) else (lambda i: "system")
    dims = None
    for i, s in enumerate(systems):
        where = prefix(i)
        n, cols = _matrix_shape(s["A"], f"{where}.A")
        _expect(n == cols, f"{where}.A", f"A must be square, got {n}x{cols}")
        nb, n_u = _matrix_shape(s["B"], f"{where}.B")
        _expect(nb == n, f"{where}.B", f"expected {n} rows, got {nb}")
        n_y = n
        if "C" in s:
            nc, n_y = _matrix_shape(s["C"], f"{where}.C")
            _expect(nc == n, f"{where}.C", f"expected {n} rows (C is n_x by n_y), got {nc}")
        if "c" in s:
            _expect(len(s["c"]) == n, f"{where}.c", f"expected {n} entries, got {len(s['c'])}")
        if "omega" in s:
            _check_supports(s["omega"], n, f"{where}.omega")
        if "nu" in s:
            _check_supports(s["nu"], n_y, f"{where}.nu")
        if "u_limits" in s:
            _check_supports(s["u_limits"], n_u, f"{where}.u_limits")
        if dims is None:
            dims = (n, n_u, n_y)
        _expect(dims == (n, n_u, n_y), where, f"dimensions {(n, n_u, n_y)} differ from system[0] {dims}")
    n_x, n_u, n_y = dims

    width = n_y
    layers = doc["network"]["layers"]
    for k, layer in enumerate(layers):
        where = f"network.layers[{k}]"
        rows, cols = _matrix_shape(layer["W"], f"{where}.W")
        _expect(cols == width, f"{where}.W", f"expected {width} columns, got {cols}")
        _expect(len(layer["b"]) == rows, f"{where}.b", f"expected {rows} entries, got {len(layer['b'])}")
        width = rows
    _expect(width == n_u, f"network.layers[{len(layers) - 1}].W", f"network output dim {width} != control dim {n_u}")
    last = layers[-1].get("activation", "identity")
    _expect(last == "identity", f"network.layers[{len(layers) - 1}].activation", "final layer must be identity")

    _check_set(doc["set"], n_x, "set")
    analysis = doc["analysis"]
    part = analysis.get("partitioner", {})
    if "cells" in part:
        _expect(len(part["cells"]) == n_x, "analysis.partitioner.cells", f"expected {n_x} entries")
    facets = analysis.get("facets", "identity")
    if facets != "identity":
        _, cols = _matrix_shape(facets, "analysis.facets")
        _expect(cols == n_x, "analysis.facets", f"expected {n_x} columns, got {cols}")
    if "goal" in analysis:
        _check_set(analysis["goal"], n_x, "analysis.goal")
    for j, a in enumerate(analysis.get("avoid", [])):
        for i, s in enumerate(a if isinstance(a, list) else [a]):
            _check_set(s, n_x, f"analysis.avoid[{j}]" + (f"[{i}]" if isinstance(a, list) else ""))
    if analysis.get("mode") == "verify":
        _expect("goal" in analysis, "analysis.goal", "verify mode needs a goal set")


def parse_set(s: dict) -> StateSet:
    kind = s["kind"]
    if kind == "box":
        return Box(s["lo"], s["hi"])
    if kind == "polytope":
        return HPolytope(s["A"], s["b"])
    radius = np.broadcast_to(np.asarray(s["radius"], dtype=float), (len(s["center"]),))
    p = s.get("p", "inf")
    return LpBall(s["center"], radius, np.inf if p == "inf" else float(p))


def set_to_dict(s: StateSet) -> dict:
    if isinstance(s, Box):
        return {"kind": "box", "lo": s.lo.tolist(), "hi": s.hi.tolist()}
    if isinstance(s, HPolytope):
        return {"kind": "polytope", "A": s.A.tolist(), "b": s.b.tolist()}
    p = "inf" if np.isinf(s.norm_order) else s.norm_order
    return {"kind": "ball", "center": s.center.tolist(), "radius": s.radius.tolist(), "p": p}


def _parse_system(s: dict) -> LtvSystem:
    def pair(key):
        sup = s.get(key)
        if sup is None:
            return None, None
        arr = np.asarray(sup, dtype=float)
        return arr[:, 0], arr[:, 1]

    w_lo, w_hi = pair("omega")
    v_lo, v_hi = pair("nu")
    u_lo, u_hi = pair("u_limits")
    return LtvSystem(
        s["A"], s["B"], s.get("C"), s.get("c"), w_lo, w_hi, v_lo, v_hi,
        None if u_lo is None else (u_lo, u_hi),
    )


def parse(doc: dict) -> AnalysisConfig:
    validate(doc)
    systems = [_parse_system(s) for s in (doc["system"] if isinstance(doc["system"], list) else [doc["system"]])]
    net = FeedforwardNetwork(
        [Layer(l["W"], l["b"], l.get("activation", "relu")) for l in doc["network"]["layers"][:-1]]
        + [Layer(doc["network"]["layers"][-1]["W"], doc["network"]["layers"][-1]["b"], "identity")]
    )
    a = doc["analysis"]
    part = a.get("partitioner", {})
    strategy = part.get("strategy", "none")
    n_x = systems[0].n_x
    cells = tuple(part.get("cells", (1,) * n_x)) if strategy == "uniform" else ()
    partition = PartitionConfig(
        strategy, cells, part.get("budget", 1), a.get("mc_samples", 1000), a.get("seed", 0), a.get("jobs", 1)
    )
    facets = a.get("facets", "identity")
    spec = ReachSpec(
        None if facets == "identity" else np.asarray(facets, dtype=float),
        Solver.LP if a.get("solver") == "lp" else Solver.CLOSED_FORM,
        a.get("bounds", "crown"),
    )
    avoid_raw = a.get("avoid", [])
    per_step = any(isinstance(x, list) for x in avoid_raw)
    if per_step:
        avoid = [[parse_set(s) for s in (x if isinstance(x, list) else [x])] for x in avoid_raw]
    else:
        avoid = [parse_set(s) for s in avoid_raw]
    return AnalysisConfig(
        systems=systems,
        net=net,
        set=parse_set(doc["set"]),
        mode=a.get("mode", "forward"),
        horizon=a.get("horizon", 1),
        partition=partition,
        spec=spec,
        goal=parse_set(a["goal"]) if "goal" in a else None,
        avoid=avoid,
        avoid_per_step=per_step,
        raw=doc,
    )


def load(path) -> AnalysisConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigInvalid("", f"cannot read {path}: {e.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigInvalid("", f"invalid JSON at line {e.lineno}: {e.msg}") from None
    return parse(doc)
