"""C1 cubic Hermite splines on a 1D partition.

Each node carries a position and a tangent (derivative with respect to the
curve parameter) in R^3. Scalar element matrices act on the local DOFs
``(value_left, deriv_left, value_right, deriv_right)``; global 3D matrices
are the Kronecker product of a scalar matrix with ``I_3`` so the DOF vector
is node-major: ``(px, py, pz, dx, dy, dz)`` per node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Mesh",
    "DiscreteCurve",
    "Assembly",
    "element_stiffness",
    "element_mass",
    "assemble",
    "evaluate",
    "interpolate",
    "arclength_violation",
    "lumped_product",
    "hermite_basis",
    "lumped_weights",
    "bending_energy",
]


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Partition ``x_0 < ... < x_N`` of the parameter interval.

    For a closed mesh the last node ``x_N`` is identified with ``x_0``, so
    there are ``N`` independent nodes; an open mesh has ``N + 1``.
    """

    nodes: np.ndarray
    closed: bool = False

    def __post_init__(self):
        x = np.array(self.nodes, dtype=float).reshape(-1)
        if x.size < 3:
            raise MeshError("a mesh needs at least two elements")
        if not np.all(np.isfinite(x)) or np.any(np.diff(x) <= 0):
            raise MeshError("mesh nodes must be finite and strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "closed", bool(self.closed))

    @classmethod
    def uniform(cls, n_elements: int, length: float, closed: bool = False) -> Mesh:
        if length <= 0:
            raise MeshError(f"length must be positive, got {length}")
        return cls(np.linspace(0.0, length, int(n_elements) + 1), closed)

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def n_nodes(self) -> int:
        """Number of independent nodes."""
        return self.n_elements if self.closed else self.n_elements + 1

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h_max(self) -> float:
        return float(self.h.max())

    @property
    def length(self) -> float:
        return float(self.nodes[-1] - self.nodes[0])

    def element_nodes(self) -> np.ndarray:
        """Independent node indices ``(left, right)`` of every element."""
        left = np.arange(self.n_elements)
        right = left + 1
        if self.closed:
            right[-1] = 0
        return np.stack([left, right], axis=1)

    def is_uniform(self) -> bool:
        h = self.h
        return bool(np.all(np.abs(h - h.mean()) <= 1e-14 * h.mean()))

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return self.closed == other.closed and np.array_equal(self.nodes, other.nodes)


@dataclass(eq=False)
class DiscreteCurve:
    """Hermite spline curve: ``positions[i]`` and ``tangents[i]`` per node."""

    mesh: Mesh
    positions: np.ndarray
    tangents: np.ndarray

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float)
        self.tangents = np.array(self.tangents, dtype=float)
        shape = (self.mesh.n_nodes, 3)
        if self.positions.shape != shape or self.tangents.shape != shape:
            raise MeshError(
                f"expected nodal arrays of shape {shape}, got "
                f"{self.positions.shape} and {self.tangents.shape}"
            )

    @property
    def n_dofs(self) -> int:
        return 6 * self.mesh.n_nodes

    def dofs(self) -> np.ndarray:
        """Node-major DOF vector."""
        return np.concatenate([self.positions, self.tangents], axis=1).reshape(-1)

    @classmethod
    def from_dofs(cls, mesh: Mesh, u) -> DiscreteCurve:
        u = np.asarray(u, dtype=float).reshape(mesh.n_nodes, 6)
        return cls(mesh, u[:, :3].copy(), u[:, 3:].copy())

    def copy(self) -> DiscreteCurve:
        return DiscreteCurve(self.mesh, self.positions.copy(), self.tangents.copy())


def _check_h(h):
    h = float(h)
    if not h > 0:
        raise MeshError(f"element length must be positive, got {h}")
    return h


def element_stiffness(h: float) -> np.ndarray:
    """Exact ``int phi_a'' phi_b''`` over an element of length ``h``."""
    h = _check_h(h)
    return np.array(
        [
            [12.0, 6.0 * h, -12.0, 6.0 * h],
            [6.0 * h, 4.0 * h * h, -6.0 * h, 2.0 * h * h],
            [-12.0, -6.0 * h, 12.0, -6.0 * h],
            [6.0 * h, 2.0 * h * h, -6.0 * h, 4.0 * h * h],
        ]
    ) / h**3


def element_mass(h: float) -> np.ndarray:
    """Exact ``int phi_a phi_b`` over an element of length ``h``."""
    h = _check_h(h)
    return h / 420.0 * np.array(
        [
            [156.0, 22.0 * h, 54.0, -13.0 * h],
            [22.0 * h, 4.0 * h * h, 13.0 * h, -3.0 * h * h],
            [54.0, 13.0 * h, 156.0, -22.0 * h],
            [-13.0 * h, -3.0 * h * h, -22.0 * h, 4.0 * h * h],
        ]
    )


def hermite_basis(t, h, order=0):
    """Hermite shape functions (or derivatives in x) at local ``t in [0, 1]``.

    Returns an array of shape ``t.shape + (4,)``.
    """
    t = np.asarray(t, dtype=float)
    if order == 0:
        cols = [
            1 - 3 * t**2 + 2 * t**3,
            h * (t - 2 * t**2 + t**3),
            3 * t**2 - 2 * t**3,
            h * (-(t**2) + t**3),
        ]
    elif order == 1:
        cols = [
            (-6 * t + 6 * t**2) / h,
            1 - 4 * t + 3 * t**2,
            (6 * t - 6 * t**2) / h,
            -2 * t + 3 * t**2,
        ]
    elif order == 2:
        cols = [
            (-6 + 12 * t) / h**2,
            (-4 + 6 * t) / h,
            (6 - 12 * t) / h**2,
            (-2 + 6 * t) / h,
        ]
    else:
        raise ValueError(f"derivative order must be 0, 1 or 2, got {order}")
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


@dataclass(frozen=True, eq=False)
class Assembly:
    """Scalar global matrices on ``2 n`` DOFs (value, derivative per node).

    ``K`` and ``M`` are the stiffness and consistent mass; ``beta`` are the
    lumped nodal weights. ``K3``/``M3`` are the componentwise 3D versions.
    """

    mesh: Mesh
    K: sp.csr_matrix
    M: sp.csr_matrix
    beta: np.ndarray

    @property
    def K3(self) -> sp.csr_matrix:
        return sp.kron(self.K, sp.identity(3), format="csr")

    @property
    def M3(self) -> sp.csr_matrix:
        return sp.kron(self.M, sp.identity(3), format="csr")


def assemble(mesh: Mesh) -> Assembly:
    conn = mesh.element_nodes()
    n = mesh.n_nodes
    rows, cols, kvals, mvals = [], [], [], []
    for (a, b), h in zip(conn, mesh.h):
        dofs = np.array([2 * a, 2 * a + 1, 2 * b, 2 * b + 1])
        r, c = np.meshgrid(dofs, dofs, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        kvals.append(element_stiffness(h).ravel())
        mvals.append(element_mass(h).ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    K = sp.csr_matrix((np.concatenate(kvals), (rows, cols)), shape=(2 * n, 2 * n))
    M = sp.csr_matrix((np.concatenate(mvals), (rows, cols)), shape=(2 * n, 2 * n))
    beta = lumped_weights(mesh)
    beta.setflags(write=False)
    return Assembly(mesh, K, M, beta)


def _locate(mesh: Mesh, x):
    x = np.asarray(x, dtype=float)
    x0, x1 = mesh.nodes[0], mesh.nodes[-1]
    if mesh.closed:
        x = x0 + np.mod(x - x0, x1 - x0)
    elif np.any((x < x0) | (x > x1)):
        raise ValueError(f"evaluation point outside [{x0}, {x1}]")
    elem = np.clip(np.searchsorted(mesh.nodes, x, side="right") - 1, 0, mesh.n_elements - 1)
    h = mesh.h[elem]
    t = (x - mesh.nodes[elem]) / h
    return elem, t, h


def evaluate(curve: DiscreteCurve, x, order: int = 0) -> np.ndarray:
    """Value or derivative of the spline at parameter(s) ``x``."""
    if order not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {order}")
    mesh = curve.mesh
    elem, t, h = _locate(mesh, x)
    conn = mesh.element_nodes()[elem]
    phi = hermite_basis(t, h, order)
    p, d = curve.positions, curve.tangents
    left, right = conn[..., 0], conn[..., 1]
    return (
        phi[..., 0:1] * p[left]
        + phi[..., 1:2] * d[left]
        + phi[..., 2:3] * p[right]
        + phi[..., 3:4] * d[right]
    )


def interpolate(mesh: Mesh, points, tangents) -> DiscreteCurve:
    """Hermite interpolant with nodal tangents normalized to unit length."""
    tangents = np.array(tangents, dtype=float)
    norms = np.linalg.norm(tangents, axis=-1)
    if np.any(norms == 0):
        raise ValueError(f"zero tangent sample at node {int(np.argmin(norms))}")
    return DiscreteCurve(mesh, points, tangents / norms[:, None])


def arclength_violation(curve: DiscreteCurve) -> float:
    return float(np.max(np.abs(np.einsum("ij,ij->i", curve.tangents, curve.tangents) - 1.0)))


def lumped_product(mesh: Mesh, f, g) -> float:
    """``sum_i beta_i f_i . g_i`` for per-node scalars or vectors."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape or f.shape[0] != mesh.n_nodes:
        raise ValueError(f"shape mismatch: {f.shape} vs {g.shape} for {mesh.n_nodes} nodes")
    if f.ndim == 1:
        prod = f * g
    else:
        prod = np.einsum("ij,ij->i", f.reshape(f.shape[0], -1), g.reshape(g.shape[0], -1))
    return float(lumped_weights(mesh) @ prod)


def lumped_weights(mesh: Mesh) -> np.ndarray:
    """Trapezoidal nodal weights ``beta_i``."""
    beta = np.zeros(mesh.n_nodes)
    conn = mesh.element_nodes()
    np.add.at(beta, conn[:, 0], 0.5 * mesh.h)
    np.add.at(beta, conn[:, 1], 0.5 * mesh.h)
    return beta


def bending_energy(curve: DiscreteCurve, kappa: float, assembly: Assembly | None = None) -> float:
    """``kappa/2 int |u''|^2``, exact for the cubic Hermite interpolant.

    Equal to ``kappa/2 u.K u`` but evaluated element by element from the
    endpoint values of ``u''`` (linear on each element), which avoids the
    cancellation of the ``1/h^3`` stiffness entries. ``assembly`` is accepted
    for interface symmetry and not needed.
    """
    mesh = curve.mesh
    elems = mesh.element_nodes()
    h = mesh.h[:, None]
    p, d = curve.positions, curve.tangents
    i, j = elems[:, 0], elems[:, 1]
    slope = (p[j] - p[i]) / h
    a = (6.0 * slope - 4.0 * d[i] - 2.0 * d[j]) / h
    b = (-6.0 * slope + 2.0 * d[i] + 4.0 * d[j]) / h
    dens = np.einsum("ij,ij->i", a, a) + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, b)
    return 0.5 * kappa * float(np.sum(h[:, 0] * dens) / 3.0)
