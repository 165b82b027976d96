"""Run configuration in a small line-based ``key = value`` format.

Keys are grouped in sections::

    [curve]
    type = torus_knot      # circle | perturbed_circle | torus_knot | line
    length = 31.9
    p = 2
    q = 3

    [mesh]
    h = 0.3                # or n_elements = 107

    [flow]
    kappa = 10             # eps defaults to 1/(10 kappa)
    tau_factor = 0.1       # tau = tau_factor * h; wins over an absolute tau

    [confinement]          # repeat the section for composite confinements
    type = ball
    radius = 4.6

    [output]
    dir = out/trefoil

A dotted key at top level (``curve.length = 31.9``) is equivalent. ``#``
starts a comment; lists are comma or whitespace separated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .confinement import CompositeConfinement, ConfinementError, SimpleConfinement, build, combine
from .curve_model import AnalyticCurve, BoundaryCondition, CurveError, generate
from .flow_solver import FlowParams
from .spline_fe import DiscreteCurve

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    def __init__(self, lineno, message):
        where = f"line {lineno}" if lineno else "end of config"
        super().__init__(f"{where}: {message}")
        self.lineno = lineno


_FLOAT, _INT, _STR, _VEC, _LIST = "float", "int", "str", "vec3", "floats"

_SCHEMA = {
    "curve": {
        "type": _STR, "length": _FLOAT, "radius": _FLOAT, "p": _INT, "q": _INT,
        "a": _FLOAT, "b": _FLOAT, "c": _FLOAT, "nu": _INT, "amplitude": _FLOAT,
        "covers": _INT, "direction": _VEC, "file": _STR, "bc": _STR,
    },
    "mesh": {"n_elements": _INT, "h": _FLOAT},
    "flow": {
        "kappa": _FLOAT, "eps": _FLOAT, "tau": _FLOAT, "tau_factor": _FLOAT,
        "max_steps": _INT, "stop_tol": _FLOAT, "snapshot_every": _INT, "seed": _INT,
        "perturb_amplitude": _FLOAT, "method": _STR,
    },
    "confinement": {
        "type": _STR, "radius": _FLOAT, "radii": _LIST, "normal": _VEC, "offset": _FLOAT,
        "axis": _STR, "height": _FLOAT, "center": _VEC,
    },
    "output": {"dir": _STR},
}

_POSITIVE = {
    ("curve", "length"), ("curve", "radius"), ("curve", "a"), ("curve", "b"), ("curve", "c"),
    ("curve", "covers"), ("curve", "nu"),
    ("mesh", "n_elements"), ("mesh", "h"),
    ("flow", "kappa"), ("flow", "eps"), ("flow", "tau"), ("flow", "tau_factor"),
    ("flow", "stop_tol"), ("flow", "snapshot_every"),
    ("confinement", "radius"), ("confinement", "height"), ("confinement", "offset"),
}

DEFAULT_MAX_STEPS = 50_000


def _parse_value(kind, text, key, lineno):
    try:
        if kind == _FLOAT:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
        if kind == _INT:
            return int(text)
        if kind == _STR:
            if not text:
                raise ValueError
            return text
        items = [float(v) for v in text.replace(",", " ").split()]
        if kind == _VEC and len(items) != 3:
            raise ValueError
        if not items:
            raise ValueError
        return items
    except ValueError:
        raise ConfigError(lineno, f"{key}: expected {kind}, got {text!r}") from None


@dataclass
class RunConfig:
    curve: dict = field(default_factory=dict)
    mesh: dict = field(default_factory=dict)
    flow: dict = field(default_factory=dict)
    confinements: list = field(default_factory=list)
    output_dir: str | None = None
    lines: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path)

    # -- derived objects -------------------------------------------------

    @property
    def kappa(self) -> float:
        return self.flow.get("kappa", 10.0)

    @property
    def eps(self) -> float:
        return self.flow.get("eps", 1.0 / (10.0 * self.kappa))

    @property
    def seed(self) -> int:
        return self.flow.get("seed", 0)

    @property
    def perturb_amplitude(self) -> float:
        return self.flow.get("perturb_amplitude", 0.0)

    def analytic_curve(self) -> AnalyticCurve | None:
        c = self.curve
        if "file" in c:
            return None
        params = {k: c[k] for k in ("p", "q", "a", "b", "c", "nu", "amplitude", "covers", "direction")
                  if k in c}
        if "radius" in c:
            params["r"] = c["radius"]
        return AnalyticCurve(c["type"], params, c["length"])

    def initial_curve(self) -> DiscreteCurve:
        from .io import read_snapshot

        if "file" in self.curve:
            curve, _ = read_snapshot(self.base_dir / self.curve["file"])
            return curve
        try:
            return generate(self.analytic_curve(), self.n_elements())
        except CurveError as exc:
            raise ConfigError(self.lines.get(("curve", "type")), str(exc)) from None

    def nominal_length(self) -> float:
        if "file" in self.curve:
            from .io import read_snapshot

            return read_snapshot(self.base_dir / self.curve["file"])[1]["length"]
        return self.curve["length"]

    def n_elements(self) -> int:
        if "n_elements" in self.mesh:
            return self.mesh["n_elements"]
        return max(8, int(math.ceil(self.curve["length"] / self.mesh["h"] - 1e-9)))

    def boundary_condition(self, closed: bool) -> BoundaryCondition:
        kind = self.curve.get("bc", "periodic" if closed else "clamped")
        try:
            return BoundaryCondition(kind)
        except CurveError as exc:
            raise ConfigError(self.lines.get(("curve", "bc")), str(exc)) from None

    def confinement(self) -> CompositeConfinement:
        if not self.confinements:
            return combine(SimpleConfinement.quadratic(np.zeros((3, 3))))
        parts = []
        for entry, lineno in self.confinements:
            kw = dict(entry)
            kind = kw.pop("type")
            center = kw.pop("center", (0.0, 0.0, 0.0))
            if kind == "none":
                parts.append(SimpleConfinement.quadratic(np.zeros((3, 3)), center))
                continue
            try:
                parts.append(build(kind, center=center, **kw))
            except (ConfinementError, KeyError) as exc:
                raise ConfigError(lineno, f"confinement {kind!r}: {exc}") from None
        return combine(*parts)

    def flow_params(self, mesh) -> FlowParams:
        f = self.flow
        if "tau_factor" in f or "tau" not in f:
            tau = f.get("tau_factor", 0.1) * mesh.h_max
        else:
            tau = f["tau"]
        return FlowParams(
            kappa=self.kappa,
            eps=self.eps,
            tau=tau,
            max_steps=f.get("max_steps", DEFAULT_MAX_STEPS),
            stop_tol=f.get("stop_tol", 1e-5),
            snapshot_every=f.get("snapshot_every", 100),
        )

    def with_ball(self, radius: float) -> RunConfig:
        """Copy with the confinement replaced by a centered ball."""
        return self._replace(confinements=[({"type": "ball", "radius": float(radius)}, None)])

    def with_eps(self, eps: float) -> RunConfig:
        return self._replace(flow={**self.flow, "eps": float(eps)})

    def _replace(self, **changes) -> RunConfig:
        data = dict(
            curve=dict(self.curve), mesh=dict(self.mesh), flow=dict(self.flow),
            confinements=list(self.confinements), output_dir=self.output_dir,
            lines=dict(self.lines), base_dir=self.base_dir,
        )
        data.update(changes)
        return RunConfig(**data)


def _validate(cfg: RunConfig, last_line: int):
    lines = cfg.lines
    c = cfg.curve
    has_file = "file" in c
    if has_file and c.get("type", "file") != "file":
        raise ConfigError(lines[("curve", "file")], "curve: give either type or file, not both")
    if not has_file:
        if "type" not in c:
            raise ConfigError(None, "missing required key curve.type")
        if c["type"] not in ("circle", "perturbed_circle", "torus_knot", "line"):
            raise ConfigError(lines[("curve", "type")], f"curve.type: unknown family {c['type']!r}")
        if "length" not in c:
            raise ConfigError(None, "missing required key curve.length")
        if "n_elements" not in cfg.mesh and "h" not in cfg.mesh:
            raise ConfigError(None, "missing required key mesh.n_elements (or mesh.h)")
    else:
        c.pop("type", None)
    if "n_elements" in cfg.mesh and cfg.mesh["n_elements"] < 8:
        raise ConfigError(lines[("mesh", "n_elements")], "mesh.n_elements must be at least 8")
    for entry, lineno in cfg.confinements:
        if "type" not in entry:
            raise ConfigError(lineno, "missing required key confinement.type")
    if "method" in cfg.flow and cfg.flow["method"] not in ("schur", "direct"):
        raise ConfigError(lines[("flow", "method")], "flow.method must be schur or direct")
    if cfg.flow.get("max_steps", 0) < 0:
        raise ConfigError(lines[("flow", "max_steps")], "flow.max_steps must be non-negative")


def parse_config(text: str, base_dir=None) -> RunConfig:
    cfg = RunConfig(base_dir=Path(base_dir) if base_dir is not None else Path())
    section = None
    current_conf = None
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ConfigError(lineno, f"unknown section [{section}]")
            if section == "confinement":
                current_conf = ({}, lineno)
                cfg.confinements.append(current_conf)
            continue
        if "=" not in line:
            raise ConfigError(lineno, f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        sec = section
        if "." in key:
            sec, key = key.split(".", 1)
            sec = sec.lower()
            # a repeated key starts the next part of a composite confinement
            if sec == "confinement" and (current_conf is None or key in current_conf[0]):
                current_conf = ({}, lineno)
                cfg.confinements.append(current_conf)
        if sec is None:
            raise ConfigError(lineno, f"key {key!r} outside of a section")
        schema = _SCHEMA.get(sec)
        if schema is None or key not in schema:
            raise ConfigError(lineno, f"unknown key {sec}.{key}")
        parsed = _parse_value(schema[key], value, key, lineno)
        if (sec, key) in _POSITIVE and not parsed > 0:
            raise ConfigError(lineno, f"{key} must be positive, got {parsed}")
        if sec == "confinement" and key == "radii" and min(parsed) <= 0:
            raise ConfigError(lineno, f"radii must be positive, got {parsed}")
        if sec == "flow" and key in ("seed", "perturb_amplitude") and parsed < 0:
            raise ConfigError(lineno, f"{key} must be non-negative, got {parsed}")
        if sec == "confinement":
            current_conf[0][key] = parsed
        elif sec == "output":
            cfg.output_dir = parsed
        else:
            getattr(cfg, sec)[key] = parsed
        cfg.lines[(sec, key)] = lineno
    _validate(cfg, lineno)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
