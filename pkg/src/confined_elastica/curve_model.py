"""Initial curves and boundary conditions.

Analytic curves are resampled so that mesh nodes are equispaced in
arclength, then rescaled to the requested length. Boundary conditions are
imposed by eliminating degrees of freedom (:class:`DofMap`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spline_fe import DiscreteCurve, Mesh, interpolate

__all__ = [
    "AnalyticCurve",
    "BoundaryCondition",
    "DofMap",
    "CurveError",
    "generate",
    "dof_map",
    "arclength_table",
]


class CurveError(ValueError):
    pass


# Gauss-Legendre rule on [0, 1] used for the arclength table.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class AnalyticCurve:
    """Parametric closed curve family.

    ``family`` is one of ``circle``, ``torus_knot``, ``perturbed_circle`` or
    ``line``; ``params`` holds the family parameters (see
    :meth:`parametrization`). ``length`` is the target length after
    rescaling; ``None`` keeps the natural length of the parametrization.
    """

    family: str
    params: dict = field(default_factory=dict)
    length: float | None = None

    def __post_init__(self):
        if self.length is not None and not self.length > 0:
            raise CurveError(f"target length must be positive, got {self.length}")

    @property
    def closed(self) -> bool:
        return self.family != "line"

    def parametrization(self):
        """Return ``(gamma, dgamma, t_end)``; the curve is traced on ``[0, t_end]``."""
        p = dict(self.params)
        fam = self.family
        if fam == "circle":
            r = float(p.get("r", 1.0))
            mu = int(p.get("covers", 1))
            if r <= 0 or mu < 1:
                raise CurveError("circle needs r > 0 and covers >= 1")

            def gamma(t):
                return np.stack([r * np.cos(t), r * np.sin(t), np.zeros_like(t)], axis=-1)

            def dgamma(t):
                return np.stack([-r * np.sin(t), r * np.cos(t), np.zeros_like(t)], axis=-1)

            return gamma, dgamma, 2 * np.pi * mu

        if fam == "perturbed_circle":
            r = float(p.get("r", 1.0))
            nu = int(p.get("nu", 5))
            mu = int(p.get("covers", 1))
            A = float(p.get("amplitude", 0.3 * r))
            if r <= 0 or nu < 1 or mu < 1:
                raise CurveError("perturbed_circle needs r > 0, nu >= 1 and covers >= 1")
            w = nu / mu

            def gamma(t):
                return np.stack([r * np.cos(t), r * np.sin(t), A * np.sin(w * t)], axis=-1)

            def dgamma(t):
                return np.stack([-r * np.sin(t), r * np.cos(t), A * w * np.cos(w * t)], axis=-1)

            return gamma, dgamma, 2 * np.pi * mu

        if fam == "torus_knot":
            pp = int(p.get("p", 2))
            qq = int(p.get("q", 3))
            a = float(p.get("a", 2.0))
            b = float(p.get("b", 1.0))
            c = float(p.get("c", 1.0))
            if pp == 0 and qq == 0:
                raise CurveError("torus knot needs (p, q) != (0, 0)")
            if math.gcd(pp, qq) != 1:
                raise CurveError(f"torus knot winding numbers must be coprime, got ({pp}, {qq})")
            if a <= 0 or b <= 0 or a <= b:
                raise CurveError("torus knot needs a > b > 0")

            def gamma(t):
                rho = a + b * np.cos(qq * t)
                return np.stack([rho * np.cos(pp * t), rho * np.sin(pp * t), c * np.sin(qq * t)], axis=-1)

            def dgamma(t):
                rho = a + b * np.cos(qq * t)
                drho = -b * qq * np.sin(qq * t)
                return np.stack(
                    [
                        drho * np.cos(pp * t) - pp * rho * np.sin(pp * t),
                        drho * np.sin(pp * t) + pp * rho * np.cos(pp * t),
                        c * qq * np.cos(qq * t),
                    ],
                    axis=-1,
                )

            return gamma, dgamma, 2 * np.pi

        if fam == "line":
            direction = np.asarray(p.get("direction", (1.0, 0.0, 0.0)), dtype=float)
            if not np.any(direction):
                raise CurveError("line direction must be non-zero")
            direction = direction / np.linalg.norm(direction)

            def gamma(t):
                return np.asarray(t)[..., None] * direction

            def dgamma(t):
                return np.ones_like(np.asarray(t, dtype=float))[..., None] * direction

            return gamma, dgamma, 1.0

        raise CurveError(f"unknown curve family {fam!r}")


def arclength_table(dgamma, t_end: float, n_intervals: int = 4096):
    """Cumulative arclength on a uniform grid of ``[0, t_end]``."""
    grid = np.linspace(0.0, t_end, n_intervals + 1)
    dt = np.diff(grid)
    tq = grid[:-1, None] + dt[:, None] * _GL_X[None, :]
    speed = np.linalg.norm(dgamma(tq), axis=-1)
    seg = dt * (speed @ _GL_W)
    return grid, np.concatenate([[0.0], np.cumsum(seg)])


def _partial_length(dgamma, t0, t1):
    dt = t1 - t0
    tq = t0[:, None] + dt[:, None] * _GL_X[None, :]
    return dt * (np.linalg.norm(dgamma(tq), axis=-1) @ _GL_W)


def _invert_arclength(dgamma, grid, table, targets, tol=1e-14):
    # bracket in the table, then bisection on the local quadrature
    j = np.clip(np.searchsorted(table, targets, side="right") - 1, 0, grid.size - 2)
    lo = grid[j].copy()
    hi = grid[j + 1].copy()
    rest = targets - table[j]
    t0 = grid[j]
    while np.max(hi - lo) > tol * max(1.0, grid[-1]):
        mid = 0.5 * (lo + hi)
        below = _partial_length(dgamma, t0, mid) < rest
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def generate(curve: AnalyticCurve, n_elements: int) -> DiscreteCurve:
    """Sample ``curve`` at nodes equispaced in arclength.

    Positions are scaled so the curve has the target length; nodal tangents
    are unit vectors, so the result satisfies the nodal arclength
    constraint exactly.
    """
    n_elements = int(n_elements)
    if n_elements < 8:
        raise CurveError(f"need at least 8 elements, got {n_elements}")
    gamma, dgamma, t_end = curve.parametrization()
    grid, table = arclength_table(dgamma, t_end)
    natural = table[-1]
    if not natural > 0:
        raise CurveError("degenerate curve of zero length")
    L = natural if curve.length is None else float(curve.length)
    closed = curve.closed
    n_nodes = n_elements if closed else n_elements + 1
    targets = natural * np.arange(n_nodes) / n_elements
    t = _invert_arclength(dgamma, grid, table, targets)
    t[0] = 0.0
    if not closed:
        t[-1] = t_end
    scale = L / natural
    mesh = Mesh.uniform(n_elements, L, closed=closed)
    return interpolate(mesh, scale * gamma(t), dgamma(t))


@dataclass(frozen=True)
class BoundaryCondition:
    """``periodic``, ``free`` or ``clamped``.

    For ``clamped`` the endpoint data default to the values of the curve the
    DOF map is built for.
    """

    kind: str = "periodic"
    start: tuple | None = None
    end: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("periodic", "clamped", "free"):
            raise CurveError(f"unknown boundary condition {self.kind!r}")
        for data in (self.start, self.end):
            if data is not None:
                _, tangent = data
                if abs(np.linalg.norm(tangent) - 1.0) > 1e-12:
                    raise CurveError("clamped tangents must have unit length")

    @classmethod
    def for_mesh(cls, mesh: Mesh) -> BoundaryCondition:
        return cls("periodic" if mesh.closed else "clamped")


@dataclass(frozen=True, eq=False)
class DofMap:
    """Map between free DOFs and the global node-major DOF vector."""

    n_global: int
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    constrained_nodes: np.ndarray

    @property
    def n_free(self) -> int:
        return self.free.size

    def restrict(self, u):
        return np.asarray(u)[self.free]

    def extend(self, w, fixed_values=None):
        out = np.zeros(self.n_global)
        out[self.free] = w
        out[self.fixed] = self.fixed_values if fixed_values is None else fixed_values
        return out

    def inverse(self) -> np.ndarray:
        """Global index -> free index (``-1`` for eliminated DOFs)."""
        inv = -np.ones(self.n_global, dtype=int)
        inv[self.free] = np.arange(self.free.size)
        return inv


def dof_map(mesh: Mesh, bc: BoundaryCondition, curve: DiscreteCurve | None = None) -> DofMap:
    if (bc.kind == "periodic") != mesh.closed:
        raise CurveError(f"boundary condition {bc.kind!r} is incompatible with a "
                         f"{'closed' if mesh.closed else 'open'} mesh")
    n = mesh.n_nodes
    n_global = 6 * n
    fixed = np.array([], dtype=int)
    fixed_values = np.array([])
    constrained = np.arange(n)
    if bc.kind == "clamped":
        fixed = np.concatenate([np.arange(6), np.arange(6 * (n - 1), 6 * n)])
        start, end = bc.start, bc.end
        if curve is not None:
            start = start or (curve.positions[0], curve.tangents[0])
            end = end or (curve.positions[-1], curve.tangents[-1])
        if start is None or end is None:
            raise CurveError("clamped boundary data missing")
        fixed_values = np.concatenate([*start, *end]).astype(float)
        constrained = np.arange(1, n - 1)
    free = np.setdiff1d(np.arange(n_global), fixed)
    return DofMap(n_global, free, fixed, fixed_values, constrained)
