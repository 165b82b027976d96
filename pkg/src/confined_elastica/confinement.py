"""Quadratic confinements and their penalty potentials.

A simple confinement is either a quadratic set ``{y : (y-c).G(y-c) <= 1}``
with ``G`` symmetric positive semi-definite, or a half-space
``{y : a.(y-c) <= offset}`` with ``offset > 0``. Both are described by a
*level* function ``s(y)`` with ``s <= 1`` meaning inside, and by the
penalty

    V(y) = 1/2 (s(y) - 1)_+^2 = 1/2 s(y)^2 + 1/2 Vcv(y)

where ``Vcv = -s^2`` inside and ``-2 s + 1`` outside is concave. The
quadratic part ``s^2`` equals ``(y-c).G(y-c)`` in both cases (for the
half-space ``G = a a^T / offset^2``), so it can be treated implicitly by a
constant matrix while ``Vcv`` is treated explicitly.

All evaluation functions accept a single point of shape ``(3,)`` or a
stack of points of shape ``(n, 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConfinementError",
    "SimpleConfinement",
    "CompositeConfinement",
    "build",
    "seminorm",
    "potential",
    "concave_part",
    "quadratic_part",
    "grad_concave_part",
    "grad_potential",
    "penetration",
]


class ConfinementError(ValueError):
    pass


def _vec3(value, name):
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ConfinementError(f"{name} must have 3 components, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ConfinementError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class SimpleConfinement:
    """One quadratic or half-space constraint.

    Use :meth:`quadratic` / :meth:`half_space` rather than the raw
    constructor; they validate and normalize the inputs.
    """

    kind: str
    G: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    a: np.ndarray | None = None
    offset: float | None = None

    @classmethod
    def quadratic(cls, G, center=(0.0, 0.0, 0.0)) -> SimpleConfinement:
        G = np.asarray(G, dtype=float)
        if G.shape != (3, 3):
            raise ConfinementError(f"G must be 3x3, got shape {G.shape}")
        if not np.allclose(G, G.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(G).max())):
            raise ConfinementError("G must be symmetric")
        G = 0.5 * (G + G.T)
        scale = np.linalg.norm(G)
        if scale > 0 and np.linalg.eigvalsh(G).min() < -1e-12 * scale:
            raise ConfinementError("G must be positive semi-definite")
        G.setflags(write=False)
        c = _vec3(center, "center")
        c.setflags(write=False)
        return cls("quadratic", G, c)

    @classmethod
    def half_space(cls, a, offset, center=(0.0, 0.0, 0.0)) -> SimpleConfinement:
        a = _vec3(a, "normal")
        if not np.any(a):
            raise ConfinementError("half-space normal must be non-zero")
        offset = float(offset)
        if not offset > 0:
            raise ConfinementError(f"half-space offset must be positive, got {offset}")
        G = np.outer(a, a) / offset**2
        c = _vec3(center, "center")
        for arr in (a, G, c):
            arr.setflags(write=False)
        return cls("half-space", G, c, a, offset)

    def level(self, y) -> np.ndarray | float:
        """Signed level: ``|y-c|_G`` (quadratic) or ``a.(y-c)/offset``."""
        z = np.asarray(y, dtype=float) - self.center
        if self.kind == "half-space":
            return z @ self.a / self.offset
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", z, self.G, z), 0.0))


@dataclass(frozen=True)
class CompositeConfinement:
    """Intersection of simple confinements; energies add up over parts."""

    parts: tuple[SimpleConfinement, ...]

    def __post_init__(self):
        if len(self.parts) == 0:
            raise ConfinementError("a composite confinement needs at least one part")
        object.__setattr__(self, "parts", tuple(self.parts))

    def __iter__(self):
        return iter(self.parts)

    def __len__(self):
        return len(self.parts)

    def potential(self, y):
        return sum(potential(p, y) for p in self.parts)

    def grad_potential(self, y):
        return sum(grad_potential(p, y) for p in self.parts)

    def concave_part(self, y):
        return sum(concave_part(p, y) for p in self.parts)

    def grad_concave_part(self, y):
        return sum(grad_concave_part(p, y) for p in self.parts)

    def penetration(self, y):
        return np.max([penetration(p, y) for p in self.parts], axis=0)


def _as_composite(conf) -> CompositeConfinement:
    if isinstance(conf, CompositeConfinement):
        return conf
    return CompositeConfinement((conf,))


def seminorm(conf: SimpleConfinement, y):
    return conf.level(y)


def quadratic_part(conf: SimpleConfinement, y):
    s = conf.level(y)
    return s * s


def potential(conf, y):
    if isinstance(conf, CompositeConfinement):
        return conf.potential(y)
    s = conf.level(y)
    return 0.5 * np.maximum(s - 1.0, 0.0) ** 2


def concave_part(conf, y):
    if isinstance(conf, CompositeConfinement):
        return conf.concave_part(y)
    s = conf.level(y)
    return np.where(s <= 1.0, -s * s, -2.0 * s + 1.0)


def grad_concave_part(conf, y):
    """Gradient of the concave part.

    Inside (level <= 1) this is ``-2 G (y-c)``; outside it is the same
    vector divided by the level, which is continuous across level = 1.
    """
    if isinstance(conf, CompositeConfinement):
        return conf.grad_concave_part(y)
    y = np.asarray(y, dtype=float)
    z = y - conf.center
    s = np.asarray(conf.level(y))
    g = -2.0 * z @ conf.G
    outside = s > 1.0
    scale = np.where(outside, 1.0 / np.where(outside, s, 1.0), 1.0)
    return g * scale[..., None] if g.ndim > 1 else g * float(scale)


def grad_potential(conf, y):
    """Gradient of the full penalty, ``G (y-c) + 1/2 grad Vcv``."""
    if isinstance(conf, CompositeConfinement):
        return conf.grad_potential(y)
    z = np.asarray(y, dtype=float) - conf.center
    return z @ conf.G + 0.5 * grad_concave_part(conf, y)


def penetration(conf, y):
    if isinstance(conf, CompositeConfinement):
        return conf.penetration(y)
    return np.maximum(conf.level(y) - 1.0, 0.0)


def _positive(value, name):
    value = float(value)
    if not value > 0 or not np.isfinite(value):
        raise ConfinementError(f"{name} must be positive, got {value}")
    return value


def _unit(vec, name):
    vec = _vec3(vec, name)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ConfinementError(f"{name} must be non-zero")
    return vec / norm


_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def _axis(axis):
    if isinstance(axis, str):
        try:
            return np.array(_AXES[axis.lower()])
        except KeyError:
            raise ConfinementError(f"unknown axis {axis!r}") from None
    return _unit(axis, "axis")


def build(kind: str, center=(0.0, 0.0, 0.0), **params) -> CompositeConfinement:
    """Build a named confinement.

    ========== ===================================================
    kind       parameters
    ========== ===================================================
    ball       radius
    ellipsoid  radii (3 values)
    slab       normal, radius (half-width)
    halfspace  normal, offset (constraint normal.(y-c) <= offset)
    cylinder   radius, height (half-height), axis (default z)
    box        radii (3 half-widths along x, y, z)
    ========== ===================================================
    """
    kind = kind.lower().replace("-", "").replace("_", "")
    if kind == "ball":
        R = _positive(params.pop("radius"), "radius")
        parts = [SimpleConfinement.quadratic(np.eye(3) / R**2, center)]
    elif kind == "ellipsoid":
        radii = np.asarray(params.pop("radii"), dtype=float).reshape(-1)
        if radii.shape != (3,):
            raise ConfinementError("ellipsoid needs three radii")
        radii = [_positive(r, "radius") for r in radii]
        parts = [SimpleConfinement.quadratic(np.diag([1.0 / r**2 for r in radii]), center)]
    elif kind == "slab":
        n = _unit(params.pop("normal"), "normal")
        R = _positive(params.pop("radius"), "radius")
        parts = [SimpleConfinement.quadratic(np.outer(n, n) / R**2, center)]
    elif kind == "halfspace":
        a = _vec3(params.pop("normal"), "normal")
        parts = [SimpleConfinement.half_space(a, params.pop("offset", 1.0), center)]
    elif kind == "cylinder":
        R = _positive(params.pop("radius"), "radius")
        H = _positive(params.pop("height"), "height")
        e = _axis(params.pop("axis", "z"))
        parts = [
            SimpleConfinement.quadratic((np.eye(3) - np.outer(e, e)) / R**2, center),
            SimpleConfinement.quadratic(np.outer(e, e) / H**2, center),
        ]
    elif kind == "box":
        radii = np.asarray(params.pop("radii"), dtype=float).reshape(-1)
        if radii.shape != (3,):
            raise ConfinementError("box needs three half-widths")
        parts = [
            SimpleConfinement.quadratic(np.outer(e, e) / _positive(r, "radius") ** 2, center)
            for e, r in zip(np.eye(3), radii)
        ]
    else:
        raise ConfinementError(f"unknown confinement kind {kind!r}")
    if params:
        raise ConfinementError(f"unexpected parameters for {kind}: {sorted(params)}")
    return CompositeConfinement(tuple(parts))


def combine(*confs) -> CompositeConfinement:
    parts = []
    for conf in confs:
        parts.extend(_as_composite(conf).parts)
    return CompositeConfinement(tuple(parts))
