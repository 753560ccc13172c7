"""Frame specification documents and JSON-schema validation.

A frame document looks like::

    {"builtin": "breathing_su2", "params": {"alpha": 0.5}, "gl": [[...]]}

Built-ins: ``closed_so3``, ``closed_sl2r``, ``breathing_su2``, ``isotropic`` and
``holonomic``.  ``isotropic`` accepts ``params.shapes`` (a shapes document) and
``params.gauge`` (``{"radial": "omega:..."}`` or ``{"time": "..."}``).
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .frame import FrameField, gl_transform
from .lagrangians import LagrangianSpec
from .liealg import BreathingFunction, BreathingSpec, breathing_closed_frame, closed_frame, get_algebra
from .spherical import apply_gauge, isotropic_frame, radial_shapes_from_dict

BUILTINS = ("closed_so3", "closed_sl2r", "breathing_su2", "isotropic", "holonomic")


def load_schema(name: str) -> dict:
    text = resources.files("tetradfield").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc, name: str):
    """Validate ``doc`` against a packaged schema, raising ``ConfigError``."""
    try:
        jsonschema.validate(doc, load_schema(name))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{name} document invalid: {exc.message}") from exc


def read_document(source) -> dict:
    """Inline JSON, ``builtin:<name>`` shorthand, or a path to a JSON file."""
    if isinstance(source, dict):
        return dict(source)
    text = str(source).strip()
    if text.startswith("builtin:"):
        return {"builtin": text.split(":", 1)[1]}
    if text.startswith("{") or text.startswith("["):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    path = Path(text)
    if not path.is_file():
        raise ConfigError(f"file not found: {text}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {text}: {exc}") from exc


def holonomic_frame(n: int = 4) -> FrameField:
    """Frame dual to ``d f^A`` for ``f = (x0, x1 + x0 x2, x2, ..., x_{n-1})``."""
    if n < 3:
        raise ConfigError("holonomic builtin needs n >= 3")

    def coframe(x):
        e = np.repeat(np.eye(n)[None], len(x), axis=0)
        e[:, 1, 0] = x[:, 2]
        e[:, 1, 2] = x[:, 0]
        return e

    de = np.zeros((n, n, n))
    de[1, 0, 2] = de[1, 2, 0] = 1.0

    def matrix(x):
        return np.linalg.inv(coframe(np.atleast_2d(x)))

    def jacobian(x):
        E = matrix(x)
        return -np.einsum("niB,Bjk,njA->niAk", E, de, E)

    return FrameField(n, matrix, jacobian, "cartesian", "holonomic", {"builtin": "holonomic", "params": {"n": n}})


def _breathing(params: dict) -> FrameField:
    variant = params.get("variant", "adapted")
    if "lambda" in params:
        lam = BreathingFunction.parse(params["lambda"])
    else:
        lam = BreathingFunction("exp", (float(params.get("alpha", 0.5)),))
    if variant == "adapted":
        chart = params.get("chart", "group_rotation_vector")
        f = breathing_closed_frame(BreathingSpec(get_algebra("su2"), lam, chart))
    elif variant == "factorized":
        if lam.kind != "exp" or len(lam.args) != 1:
            raise ConfigError("factorized variant needs lambda of the form exp:alpha")
        f = isotropic_frame(radial_shapes_from_dict({"builtin": "su2_background", "alpha": lam.args[0]}))
    else:
        raise ConfigError(f"unknown breathing variant {variant!r}")
    return f.with_matrix(f.matrix, f.jacobian_fn, spec={"builtin": "breathing_su2", "params": dict(params)})


def _isotropic(params: dict) -> FrameField:
    shapes_doc = params.get("shapes", {"builtin": "su2_background", "alpha": params.get("alpha", 0.5)})
    shapes = radial_shapes_from_dict(read_document(shapes_doc) if isinstance(shapes_doc, str) else shapes_doc)
    if "gauge" in params:
        shapes = apply_gauge(shapes, params["gauge"])
    f = isotropic_frame(shapes)
    return f.with_matrix(f.matrix, f.jacobian_fn, spec={"builtin": "isotropic", "params": dict(params)})


def build_frame(doc) -> FrameField:
    """Construct the frame described by a (validated) frame document."""
    doc = read_document(doc)
    validate(doc, "frame")
    name, params = doc["builtin"], dict(doc.get("params", {}))
    if name in ("closed_so3", "closed_sl2r"):
        f = closed_frame(get_algebra(name.split("_", 1)[1]), params.get("chart", "group_rotation_vector"))
    elif name == "breathing_su2":
        f = _breathing(params)
    elif name == "isotropic":
        f = _isotropic(params)
    else:
        f = holonomic_frame(int(params.get("n", 4)))
    if "gl" in doc:
        L = np.array(doc["gl"], dtype=float)
        if L.shape != (f.dim, f.dim):
            raise ConfigError(f"gl matrix must be {f.dim}x{f.dim}")
        f = gl_transform(f, L)
    return f


def build_lagrangian(source) -> LagrangianSpec:
    """Shorthand (``born_infeld:1,0.3,0.2``), inline JSON or a JSON file."""
    if isinstance(source, LagrangianSpec):
        return source
    text = str(source).strip()
    if not text.startswith("{") and Path(text).is_file():
        text = Path(text).read_text()
    if text.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid Lagrangian JSON: {exc}") from exc
        validate(doc, "lagrangian")
        return LagrangianSpec.from_dict(doc)
    return LagrangianSpec.parse(text)
