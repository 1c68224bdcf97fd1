"""
Per-drone CBF-QP controller.

Each drone solves

    min  eps * |u|^2 + w^2
    s.t. grad_b . u + drift_c + a * h >= w          (coverage, softened)
         2 (p_xi - p_j) . u + (a / 2) h_ca >= 0     (collision, hard, j != xi)

with h = I_xi - gamma and h_ca = |p_xi - p_j|^2 - d_ca^2, then clips |u| to
u_max. The nominal input is zero, so the controller only moves a drone when
the coverage barrier asks for it.
"""

from dataclasses import dataclass, field
from itertools import combinations
import logging

import numpy as np

from .coverage_dynamics import FleetState, Partition, performance_matrix
from .field_model import GroundGrid

log = logging.getLogger(__name__)


class CoincidentDronesError(RuntimeError):
    """Two drones share a position, the collision barrier is undefined."""


class QPInfeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class ControllerParams:
    sigma: float = 1.0
    delta: float = 5.0
    gamma: float = 5000.0
    epsilon: float = 1e-4
    a: float = 5.0
    d_ca: float = 0.5
    u_max: float = 5.0

    def __post_init__(self):
        for name in ("sigma", "delta", "gamma", "epsilon", "a", "d_ca", "u_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass
class LinearizedBarrier:
    h: float
    grad_b: np.ndarray
    drift_c: float


@dataclass
class QPProblem:
    """Variables z = (u_x, u_y, w); rows A z >= b. Row 0 is the soft coverage row."""

    epsilon: float
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if len(self.A) < 1 or self.A.shape[1] != 3 or len(self.b) != len(self.A):
            raise ValueError("QP needs at least one row over (u_x, u_y, w)")
        if self.epsilon <= 0:
            raise ValueError("objective must be positive definite")

    @property
    def hessian(self) -> np.ndarray:
        return np.diag([2 * self.epsilon, 2 * self.epsilon, 2.0])

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(self.epsilon * (z[..., 0] ** 2 + z[..., 1] ** 2) + z[..., 2] ** 2)


@dataclass
class QPSolution:
    z: np.ndarray
    lam: np.ndarray
    active: tuple
    objective: float

    @property
    def u(self) -> np.ndarray:
        return self.z[:2]

    @property
    def w(self) -> float:
        return float(self.z[2])


@dataclass
class ControlOutput:
    u: np.ndarray
    w: float
    h: float
    active: tuple = ()
    fallback: bool = False
    barrier: LinearizedBarrier = field(default=None, repr=False)


def barrier(xi, fleet: FleetState, part: Partition, grid: GroundGrid, params) -> LinearizedBarrier:
    """Coverage barrier h = I_xi - gamma and the affine-in-u split of its derivative.

    The partition is held fixed while differentiating.
    """
    own = part.cell(xi)
    if own.size == 0:
        return LinearizedBarrier(h=-params.gamma, grad_b=np.zeros(2), drift_c=0.0)
    X = grid.gravity_points[own]
    psi = grid.psi.ravel()[own]
    L = performance_matrix(fleet.positions, X, params.sigma)
    lx = L[xi]
    k = params.delta * grid.volume
    I = k * np.dot(lx, psi)
    # d l / d p = -(p - X) / sigma^2 * l
    grad_l = -(fleet.positions[xi] - X) / params.sigma ** 2 * lx[:, None]
    grad_b = k * (psi[:, None] * grad_l).sum(axis=0)
    psi_dot = -params.delta * L.max(axis=0) * psi
    drift_c = k * np.dot(lx, psi_dot)
    return LinearizedBarrier(h=float(I - params.gamma), grad_b=grad_b, drift_c=float(drift_c))


def collision_rows(xi, fleet: FleetState, params):
    """Hard pairwise rows ``(row over (u_x, u_y, w), lower bound)``, one per other drone."""
    rows = []
    p = fleet.positions
    for j in range(fleet.n):
        if j == xi:
            continue
        d = p[xi] - p[j]
        dist2 = float(d @ d)
        if dist2 == 0.0:
            raise CoincidentDronesError(f"drones {xi} and {j} coincide at {p[xi].tolist()}")
        h_ca = dist2 - params.d_ca ** 2
        # half the margin each, both drones run the same filter
        rows.append((np.array([2 * d[0], 2 * d[1], 0.0]), -0.5 * params.a * h_ca))
    return rows


def assemble_qp(lb: LinearizedBarrier, rows, params) -> QPProblem:
    A = [np.array([lb.grad_b[0], lb.grad_b[1], -1.0])]
    b = [-(lb.drift_c + params.a * lb.h)]
    for r, lo in rows:
        A.append(r)
        b.append(lo)
    return QPProblem(epsilon=params.epsilon, A=np.array(A), b=np.array(b))


def _row_tolerance(qp: QPProblem, z) -> np.ndarray:
    return 1e-9 * (1.0 + np.abs(qp.b) + np.abs(qp.A) @ np.abs(z))


def solve_qp(qp: QPProblem) -> QPSolution:
    """Exact solution by enumerating active sets of at most three rows.

    Each candidate set is solved through its full KKT system. The objective
    is strictly convex, so any candidate that is primal and dual feasible is
    the global optimum; the lowest-objective one is kept to stay robust on
    degenerate ties.
    """
    P = qp.hessian
    m = len(qp.b)
    best = None
    for k in range(0, min(m, 3) + 1):
        for S in combinations(range(m), k):
            S = list(S)
            lam = np.zeros(m)
            if k == 0:
                z = np.zeros(3)
            else:
                AS = qp.A[S]
                if np.linalg.matrix_rank(AS) < k:
                    continue
                K = np.block([[P, -AS.T], [AS, np.zeros((k, k))]])
                sol = np.linalg.solve(K, np.concatenate([np.zeros(3), qp.b[S]]))
                z, lam_S = sol[:3], sol[3:]
                if np.any(lam_S < -1e-9 * max(1.0, np.abs(lam_S).max())):
                    continue
                lam[S] = np.maximum(lam_S, 0.0)
            if np.any(qp.A @ z < qp.b - _row_tolerance(qp, z)):
                continue
            obj = qp.objective(z)
            if best is None or obj < best.objective:
                best = QPSolution(z=z, lam=lam, active=tuple(S), objective=obj)
    if best is None:
        raise QPInfeasible("hard constraints admit no solution")
    return best


def kkt_residual(qp: QPProblem, sol: QPSolution) -> float:
    """Max of stationarity, primal, dual and complementarity violations."""
    slack = qp.A @ sol.z - qp.b
    stat = qp.hessian @ sol.z - qp.A.T @ sol.lam
    return float(max(np.abs(stat).max(),
                     max(0.0, -slack.min()),
                     max(0.0, -sol.lam.min()),
                     np.abs(sol.lam * slack).max()))


def saturate(u, u_max):
    u = np.asarray(u, dtype=float)
    n = np.hypot(u[0], u[1])
    if n > u_max:
        u = u * (u_max / n)
        # rounding can leave the norm an ulp above the cap
        while np.hypot(u[0], u[1]) > u_max:
            u = u * (1.0 - 2.0 ** -52)
    return u


def repulsion(xi, fleet: FleetState, u_max):
    """Full-speed step away from the other drones, inverse-distance weighted."""
    d = fleet.positions[xi] - np.delete(fleet.positions, xi, axis=0)
    s = (d / np.sum(d * d, axis=1, keepdims=True)).sum(axis=0)
    n = np.linalg.norm(s)
    return np.zeros(2) if n == 0 else saturate(u_max * s / n, u_max)


def compute_control(xi, fleet: FleetState, part: Partition, grid: GroundGrid, params) -> ControlOutput:
    lb = barrier(xi, fleet, part, grid, params)
    rows = collision_rows(xi, fleet, params)
    qp = assemble_qp(lb, rows, params)
    try:
        sol = solve_qp(qp)
    except QPInfeasible:
        log.warning("drone %d: collision rows infeasible, falling back to repulsion", xi)
        return ControlOutput(u=repulsion(xi, fleet, params.u_max), w=0.0, h=lb.h,
                             fallback=True, barrier=lb)
    return ControlOutput(u=saturate(sol.u, params.u_max), w=sol.w, h=lb.h,
                         active=sol.active, barrier=lb)
