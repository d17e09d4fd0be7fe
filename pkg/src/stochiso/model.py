"""Planar SDE models dX = f(X) dt + g(X) dW (Ito) and their diffusion tensor."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, EvaluationError
from .expression import Node, eval_expression, free_names, parse_expression, to_text

BOUNDARIES = ("reflecting", "truncated")


@dataclass(frozen=True)
class Domain:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        vals = (self.x_lo, self.x_hi, self.y_lo, self.y_hi)
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError(f"domain bounds must be finite: {vals}")
        if not (self.x_hi > self.x_lo and self.y_hi > self.y_lo):
            raise ConfigError(f"degenerate domain rectangle: {vals}")

    @property
    def center(self):
        return 0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi)

    @property
    def area(self):
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)

    def contains(self, point):
        x, y = point
        return self.x_lo <= x <= self.x_hi and self.y_lo <= y <= self.y_hi

    @classmethod
    def square(cls, half_width):
        return cls(-half_width, half_width, -half_width, half_width)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    drift: tuple
    noise: tuple
    parameters: Mapping[str, float]
    domain: Domain
    boundary: str = "truncated"

    def __post_init__(self):
        if len(self.drift) != 2:
            raise ConfigError("drift must have exactly two components")
        if len(self.noise) != 2:
            raise ConfigError("noise matrix must have two rows")
        k = len(self.noise[0])
        if k < 1 or len(self.noise[1]) != k:
            raise ConfigError("noise matrix rows must have equal length >= 1")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        object.__setattr__(self, "parameters", MappingProxyType(dict(self.parameters)))
        names = set()
        for node in self.drift + tuple(e for row in self.noise for e in row):
            names |= free_names(node)
        missing = sorted(n for n in names - {"x", "y"} if n not in self.parameters)
        if missing:
            raise ConfigError(f"model {self.name!r}: unbound parameters {missing}")
        try:
            d = eval_diffusion(self, self.domain.center)
        except EvaluationError as exc:
            raise ConfigError(f"model {self.name!r}: {exc}") from None
        eig = np.linalg.eigvalsh(d)
        if eig.min() < -1e-12 * max(1.0, abs(eig).max()):
            raise ConfigError(f"model {self.name!r}: diffusion tensor not positive semidefinite")

    @property
    def noise_dim(self):
        return len(self.noise[0])

    def bindings(self, x, y):
        b = dict(self.parameters)
        b["x"] = x
        b["y"] = y
        return b

    def to_dict(self):
        return {
            "name": self.name,
            "drift": [to_text(e) for e in self.drift],
            "noise": [[to_text(e) for e in row] for row in self.noise],
            "parameters": dict(self.parameters),
            "domain": {"x": [self.domain.x_lo, self.domain.x_hi],
                       "y": [self.domain.y_lo, self.domain.y_hi]},
            "boundary": self.boundary,
        }


def _parse_all(exprs):
    return tuple(e if not isinstance(e, str) else parse_expression(e) for e in exprs)


def make_model(name, drift, noise, parameters, domain, boundary="truncated"):
    """Build a ModelSpec from expression strings (or ready ASTs)."""
    if isinstance(domain, Mapping):
        domain = _domain_from_dict(domain)
    return ModelSpec(
        name=name,
        drift=_parse_all(drift),
        noise=tuple(_parse_all(row) for row in noise),
        parameters={k: float(v) for k, v in parameters.items()},
        domain=domain,
        boundary=boundary,
    )


def _domain_from_dict(d):
    try:
        (x_lo, x_hi), (y_lo, y_hi) = d["x"], d["y"]
    except (KeyError, TypeError, ValueError):
        raise ConfigError('domain must look like {"x": [lo, hi], "y": [lo, hi]}') from None
    return Domain(float(x_lo), float(x_hi), float(y_lo), float(y_hi))


_CONFIG_KEYS = {"name", "drift", "noise", "parameters", "domain", "boundary"}


def model_from_dict(data: Mapping, overrides: Mapping[str, float] | None = None) -> ModelSpec:
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
    for key in ("name", "drift", "noise", "domain"):
        if key not in data:
            raise ConfigError(f"model config missing {key!r}")
    if not isinstance(data["drift"], Sequence) or isinstance(data["drift"], str):
        raise ConfigError("drift must be a list of two expressions")
    params = _merge_overrides(dict(data.get("parameters", {})), overrides)
    return make_model(
        str(data["name"]), data["drift"], data["noise"], params, data["domain"],
        data.get("boundary", "truncated"),
    )


def load_model_config(path, overrides=None) -> ModelSpec:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model config {path}: {exc}") from None
    return model_from_dict(data, overrides)


def _merge_overrides(params, overrides):
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ConfigError(f"unknown parameter override {key!r}; known: {sorted(params)}")
        params[key] = float(value)
    return params


_BUILTINS = {
    "spiral-sink": dict(
        drift=["a11*x + a12*y", "a21*x + a22*y"],
        noise=[["sqrt(2*D)", "0"], ["0", "sqrt(2*D)"]],
        parameters={"a11": 0.1598, "a12": -0.52, "a21": 0.7227, "a22": -0.319, "D": 1.25e-3},
        domain={"x": [-0.6, 0.6], "y": [-0.6, 0.6]},
        boundary="truncated",
    ),
    "stuart-landau": dict(
        drift=["b*x*(1 - (x^2 + y^2)) - y*(1 + b*a*(x^2 + y^2))",
               "b*y*(1 - (x^2 + y^2)) + x*(1 + b*a*(x^2 + y^2))"],
        noise=[["sqrt(2*Dx)", "0"], ["0", "sqrt(2*Dy)"]],
        parameters={"a": 1.0, "b": 2.0, "Dx": 0.1, "Dy": 0.1},
        domain={"x": [-1.75, 1.75], "y": [-1.75, 1.75]},
        boundary="truncated",
    ),
    "heteroclinic": dict(
        drift=["cos(x)*sin(y) + alpha*sin(2*x)", "-sin(x)*cos(y) + alpha*sin(2*y)"],
        noise=[["sqrt(2*D)", "0"], ["0", "sqrt(2*D)"]],
        parameters={"alpha": 0.1, "D": 0.1},
        domain={"x": [-math.pi / 2, math.pi / 2], "y": [-math.pi / 2, math.pi / 2]},
        boundary="reflecting",
    ),
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin_model(name: str, overrides: Mapping[str, float] | None = None) -> ModelSpec:
    """One of the reference oscillators with default parameters and domain."""
    try:
        template = _BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown builtin model {name!r}; choose from {BUILTIN_NAMES}") from None
    data = dict(template, name=name)
    return model_from_dict(data, overrides)


def eval_drift(spec: ModelSpec, point) -> tuple[float, float]:
    x, y = point
    b = spec.bindings(x, y)
    return (eval_expression(spec.drift[0], b), eval_expression(spec.drift[1], b))


def drift_arrays(spec: ModelSpec, x, y):
    """Vectorized drift; returns two arrays shaped like ``x``."""
    x = np.asarray(x, dtype=float)
    b = spec.bindings(x, np.asarray(y, dtype=float))
    return tuple(np.broadcast_to(eval_expression(e, b), x.shape).astype(float) for e in spec.drift)


def noise_arrays(spec: ModelSpec, x, y):
    """g evaluated at the points, shape ``x.shape + (2, k)``."""
    x = np.asarray(x, dtype=float)
    b = spec.bindings(x, np.asarray(y, dtype=float))
    g = np.empty(x.shape + (2, spec.noise_dim))
    for r, row in enumerate(spec.noise):
        for c, e in enumerate(row):
            g[..., r, c] = eval_expression(e, b)
    return g


def noise_is_constant(spec: ModelSpec) -> bool:
    return not any(free_names(e) & {"x", "y"} for row in spec.noise for e in row)


def diffusion_arrays(spec: ModelSpec, x, y):
    """D = g g^T / 2 at the points, shape ``x.shape + (2, 2)``."""
    g = noise_arrays(spec, x, y)
    return 0.5 * np.einsum("...ik,...jk->...ij", g, g)


def eval_diffusion(spec: ModelSpec, point) -> np.ndarray:
    x, y = point
    return diffusion_arrays(spec, np.float64(x), np.float64(y))
