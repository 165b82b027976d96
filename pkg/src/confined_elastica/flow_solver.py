"""Semi-implicit gradient flow for confined elastic curves.

One step finds the velocity ``w`` (free DOFs) and nodal multipliers ``lam``
from the saddle-point system

    [A  B^T] [w  ]   [b]
    [B  0  ] [lam] = [0]

with the step-independent operator ``A = M + tau kappa K + (tau/eps) C``
and the linearized arclength constraint ``B w = 0`` (row ``i``:
``d_i . w'(x_i) = 0``). The convex quadratic part of the penalty is
implicit, its concave part explicit, which makes the scheme
unconditionally energy stable. Positions and tangents are then updated
by ``tau w``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .confinement import CompositeConfinement, combine
from .curve_model import BoundaryCondition, DofMap, dof_map
from .spline_fe import Assembly, DiscreteCurve, assemble, bending_energy

__all__ = [
    "FlowParams",
    "StepSystem",
    "StepSolution",
    "EnergyRecord",
    "FlowState",
    "GradientFlow",
    "SolverError",
    "StabilityError",
    "DegenerateConstraintError",
    "discrete_energy",
    "energy_gradient",
]

log = logging.getLogger(__name__)

STATIONARY = "stationary"
STEP_BUDGET = "step_budget"
ERROR = "error"


class SolverError(RuntimeError):
    pass


class DegenerateConstraintError(SolverError):
    def __init__(self, node, norm):
        super().__init__(f"degenerate arclength constraint at node {node} (|d| = {norm:.3g})")
        self.node = node


class StabilityError(SolverError):
    """Energy increased during a step; the scheme forbids this."""


@dataclass(frozen=True)
class FlowParams:
    kappa: float = 10.0
    eps: float | None = None
    tau: float = 0.03
    max_steps: int = 10_000
    stop_tol: float = 1e-5
    snapshot_every: int = 100

    def __post_init__(self):
        if self.eps is None:
            object.__setattr__(self, "eps", 1.0 / (10.0 * self.kappa))
        for name in ("kappa", "eps", "tau", "stop_tol"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")

    @classmethod
    def for_mesh(cls, mesh, tau_factor: float = 0.1, **kwargs) -> FlowParams:
        """Parameters with ``tau = tau_factor * h`` for the mesh width ``h``."""
        return cls(tau=tau_factor * mesh.h_max, **kwargs)


@dataclass
class StepSystem:
    A: sp.csc_matrix
    B: sp.csr_matrix
    b: np.ndarray


@dataclass
class StepSolution:
    w: np.ndarray
    lam: np.ndarray


@dataclass(frozen=True)
class EnergyRecord:
    k: int
    time: float
    E_bend: float
    E_conf: float
    E_total: float
    dtu_norm: float
    arclen_violation: float
    max_penetration: float


@dataclass
class FlowState:
    curve: DiscreteCurve
    k: int = 0
    history: list = field(default_factory=list)
    accumulated: np.ndarray | None = None
    dissipated: float = 0.0
    termination_reason: str | None = None
    last_lam: np.ndarray | None = None

    def __post_init__(self):
        if self.accumulated is None:
            self.accumulated = np.zeros(self.curve.mesh.n_nodes)


def _lumped_position_matrix(beta, G):
    # beta_i * G in the position block of node i
    n = beta.size
    P = sp.diags(np.ravel(np.stack([beta, np.zeros(n)], axis=1)))
    return sp.kron(P, sp.csr_matrix(G), format="csr")


def discrete_energy(curve: DiscreteCurve, conf, kappa, eps, assembly: Assembly | None = None):
    """Return ``(E_bend, E_conf)`` with ``E_conf = 1/eps sum_i beta_i V(p_i)``."""
    if assembly is None:
        assembly = assemble(curve.mesh)
    E_bend = bending_energy(curve, kappa)
    E_conf = float(assembly.beta @ conf.potential(curve.positions)) / eps
    return E_bend, E_conf


def energy_gradient(curve: DiscreteCurve, conf, kappa, eps, assembly: Assembly | None = None):
    """``(kappa K + C/eps) u - c/eps + g/(2 eps)`` as a global DOF vector.

    Equals the derivative of ``E_bend + E_conf`` with respect to the DOFs.
    """
    if assembly is None:
        assembly = assemble(curve.mesh)
    conf = combine(conf)
    n = curve.mesh.n_nodes
    u2 = np.stack([curve.positions, curve.tangents], axis=1).reshape(2 * n, 3)
    grad = kappa * (assembly.K @ u2)
    grad = grad.reshape(n, 6)
    grad[:, :3] += assembly.beta[:, None] * conf.grad_potential(curve.positions) / eps
    return grad.ravel()


class GradientFlow:
    """Constant operators and factorizations for one (mesh, bc, confinement, params).

    ``method`` selects the saddle-point solver: ``"schur"`` reuses a
    factorization of ``A`` and solves the nodal Schur complement each step,
    ``"direct"`` factorizes the full indefinite system with SuperLU.
    """

    def __init__(self, mesh, conf, params: FlowParams, bc: BoundaryCondition | None = None,
                 curve: DiscreteCurve | None = None, method: str = "schur"):
        if method not in ("schur", "direct"):
            raise ValueError(f"unknown solver method {method!r}")
        self.mesh = mesh
        self.conf: CompositeConfinement = combine(conf)
        self.params = params
        self.bc = bc if bc is not None else BoundaryCondition.for_mesh(mesh)
        self.method = method
        self.assembly = assemble(mesh)
        self.dofs: DofMap = dof_map(mesh, self.bc, curve)
        self.K3 = self.assembly.K3
        self.M3 = self.assembly.M3
        G_sum = sum(part.G for part in self.conf)
        self.C = _lumped_position_matrix(self.assembly.beta, G_sum)
        # constant right-hand-side contribution of translated centers
        Gc = sum(part.G @ part.center for part in self.conf)
        lift = np.zeros((mesh.n_nodes, 6))
        lift[:, :3] = self.assembly.beta[:, None] * Gc
        self.center_lift = lift.ravel()
        self.A = self.build_constant_operator()
        self._setup_constraints()
        self._factorize()

    # -- operators -------------------------------------------------------

    def build_constant_operator(self) -> sp.csc_matrix:
        p = self.params
        A = self.M3 + (p.tau * p.kappa) * self.K3 + (p.tau / p.eps) * self.C
        free = self.dofs.free
        return sp.csc_matrix(A[free][:, free])

    def _setup_constraints(self):
        nodes = self.dofs.constrained_nodes
        inv = self.dofs.inverse()
        # free-vector indices of the tangent DOFs of constrained nodes, shape (m, 3)
        self.tangent_index = inv[6 * nodes[:, None] + 3 + np.arange(3)[None, :]]
        if np.any(self.tangent_index < 0):
            raise SolverError("constrained node with eliminated tangent DOFs")

    def _factorize(self):
        self.lu = spla.splu(self.A)
        if self.method == "schur":
            m = self.tangent_index.shape[0]
            E = np.zeros((self.A.shape[0], 3 * m))
            E[self.tangent_index.ravel(), np.arange(3 * m)] = 1.0
            Z = self.lu.solve(E)
            self._Z = Z
            self._Ainv_tt = Z[self.tangent_index.ravel()].reshape(m, 3, m, 3)

    def constraint_matrix(self, tangents) -> sp.csr_matrix:
        nodes = self.dofs.constrained_nodes
        d = tangents[nodes]
        m = nodes.size
        rows = np.repeat(np.arange(m), 3)
        return sp.csr_matrix((d.ravel(), (rows, self.tangent_index.ravel())),
                             shape=(m, self.A.shape[0]))

    def rhs(self, curve: DiscreteCurve) -> np.ndarray:
        p = self.params
        u = curve.dofs()
        n = curve.mesh.n_nodes
        g = np.zeros((n, 6))
        g[:, :3] = self.assembly.beta[:, None] * self.conf.grad_concave_part(curve.positions)
        b = (-p.kappa * (self.K3 @ u)
             - (self.C @ u - self.center_lift) / p.eps
             - g.ravel() / (2.0 * p.eps))
        return self.dofs.restrict(b)

    def _check_constraints(self, tangents):
        nodes = self.dofs.constrained_nodes
        norms = np.linalg.norm(tangents[nodes], axis=1)
        if nodes.size and norms.min() < 0.5:
            i = int(np.argmin(norms))
            raise DegenerateConstraintError(int(nodes[i]), float(norms[i]))

    def build_step(self, curve: DiscreteCurve) -> StepSystem:
        self._check_constraints(curve.tangents)
        return StepSystem(self.A, self.constraint_matrix(curve.tangents), self.rhs(curve))

    # -- linear algebra ----------------------------------------------------

    def solve_schur(self, tangents, b) -> StepSolution:
        d = tangents[self.dofs.constrained_nodes]
        y = self.lu.solve(b)
        if d.shape[0] == 0:
            return StepSolution(y, np.zeros(0))
        S = np.einsum("ia,iajb,jb->ij", d, self._Ainv_tt, d, optimize=True)
        By = np.einsum("ij,ij->i", d, y[self.tangent_index])
        try:
            factor = sla.cho_factor(S, check_finite=False)
        except sla.LinAlgError:
            self._check_constraints(tangents)
            raise SolverError("singular Schur complement") from None
        lam = sla.cho_solve(factor, By, check_finite=False)
        w = y - self._Z @ (d * lam[:, None]).ravel()
        return StepSolution(w, lam)

    def solve_direct(self, system: StepSystem) -> StepSolution:
        return solve_saddle_point(system)

    def solve(self, curve: DiscreteCurve, system: StepSystem | None = None) -> StepSolution:
        self._check_constraints(curve.tangents)
        if self.method == "schur" and system is None:
            return self.solve_schur(curve.tangents, self.rhs(curve))
        if system is None:
            system = self.build_step(curve)
        return solve_saddle_point(system)

    # -- energies ------------------------------------------------------------

    def energy(self, curve: DiscreteCurve):
        return discrete_energy(curve, self.conf, self.params.kappa, self.params.eps, self.assembly)

    def star_norm(self, w_global) -> float:
        return float(np.sqrt(max(w_global @ (self.M3 @ w_global), 0.0)))

    def record(self, state: FlowState, dtu_norm: float) -> EnergyRecord:
        curve = state.curve
        E_bend, E_conf = self.energy(curve)
        d2 = np.einsum("ij,ij->i", curve.tangents, curve.tangents)
        pen = self.conf.penetration(curve.positions)
        return EnergyRecord(
            k=state.k,
            time=state.k * self.params.tau,
            E_bend=E_bend,
            E_conf=E_conf,
            E_total=E_bend + E_conf,
            dtu_norm=dtu_norm,
            arclen_violation=float(np.max(np.abs(d2 - 1.0))),
            max_penetration=float(np.max(pen)),
        )

    # -- time stepping -------------------------------------------------------

    def initial_state(self, curve: DiscreteCurve) -> FlowState:
        state = FlowState(curve.copy())
        state.history.append(self.record(state, float("nan")))
        return state

    def advance(self, state: FlowState) -> FlowState:
        tau = self.params.tau
        sol = self.solve(state.curve)
        w = self.dofs.extend(sol.w, np.zeros(self.dofs.fixed.size))
        step = w.reshape(-1, 6)
        curve = state.curve
        curve.positions = curve.positions + tau * step[:, :3]
        curve.tangents = curve.tangents + tau * step[:, 3:]
        state.accumulated += tau**2 * np.einsum("ij,ij->i", step[:, 3:], step[:, 3:])
        state.k += 1
        state.last_lam = sol.lam
        norm = self.star_norm(w)
        state.dissipated += tau * norm**2
        rec = self.record(state, norm)
        prev = state.history[-1].E_total
        E0 = state.history[0].E_total
        if rec.E_total > prev + 1e-10 * (1.0 + E0):
            state.history.append(rec)
            raise StabilityError(
                f"energy increased at step {state.k}: {prev!r} -> {rec.E_total!r}"
            )
        state.history.append(rec)
        self.last_velocity = w
        return state

    def run(self, state: FlowState, callback=None) -> FlowState:
        """Advance until ``||d_t u||_* <= stop_tol`` or the step budget is spent."""
        p = self.params
        state.termination_reason = STEP_BUDGET
        if callback is not None:
            callback(state)
        for _ in range(p.max_steps):
            try:
                self.advance(state)
            except SolverError:
                state.termination_reason = ERROR
                raise
            if callback is not None:
                callback(state)
            if state.history[-1].dtu_norm <= p.stop_tol:
                state.termination_reason = STATIONARY
                break
        log.debug("flow stopped after %d steps (%s)", state.k, state.termination_reason)
        return state


def solve_saddle_point(system: StepSystem) -> StepSolution:
    """Solve the full saddle-point system with a sparse LU factorization."""
    A, B, b = system.A, system.B, system.b
    n, m = A.shape[0], B.shape[0]
    KKT = sp.bmat([[A, B.T], [B, None]], format="csc")
    rhs = np.concatenate([b, np.zeros(m)])
    try:
        x = spla.splu(KKT).solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"singular saddle-point system: {exc}") from None
    if not np.all(np.isfinite(x)):
        raise SolverError("saddle-point solve produced non-finite values")
    return StepSolution(x[:n], x[n:])


def perturb(curve: DiscreteCurve, amplitude: float, seed: int) -> DiscreteCurve:
    """Add seeded Gaussian noise to the nodal positions (tangents untouched)."""
    rng = np.random.default_rng(seed)
    out = curve.copy()
    out.positions = out.positions + amplitude * rng.standard_normal(out.positions.shape)
    return out
