"""Monitoring performance, importance decay, Voronoi ownership and coverage metrics."""

from dataclasses import dataclass, replace

import numpy as np

from .field_model import GroundGrid, MappingParams, VirtualField


@dataclass
class FleetState:
    positions: np.ndarray
    velocities: np.ndarray = None

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.shape[1] != 2 or len(self.positions) < 1:
            raise ValueError("positions must be an (N, 2) array with N >= 1")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")
        if self.velocities is None:
            self.velocities = np.zeros_like(self.positions)
        else:
            self.velocities = np.asarray(self.velocities, dtype=float).reshape(self.positions.shape)

    @property
    def n(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class PerfParams:
    sigma: float = 1.0
    delta: float = 5.0

    def __post_init__(self):
        if self.sigma <= 0 or self.delta <= 0:
            raise ValueError("sigma and delta must be positive")


@dataclass
class Partition:
    """``owner[k]`` is the 0-based index of the drone owning polygon k."""

    owner: np.ndarray
    n_drones: int

    def cell(self, xi) -> np.ndarray:
        return np.flatnonzero(self.owner == xi)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.owner, minlength=self.n_drones)


def performance(p, x, sigma):
    """exp(-|p - x|^2 / (2 sigma^2)); broadcasts over leading axes."""
    d = np.asarray(p, dtype=float) - np.asarray(x, dtype=float)
    return np.exp(-np.sum(d * d, axis=-1) / (2.0 * sigma * sigma))


def performance_matrix(positions, points, sigma):
    """(N, K) matrix of performance between every drone and every point."""
    return performance(np.asarray(positions)[:, None, :], np.asarray(points)[None, :, :], sigma)


def decay_points(phi, points, positions, params, dt):
    """Exact exponential step of importance at projected target ``points``.

    ``phi`` has the shape of ``points`` minus the trailing axis.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    lmax = performance_matrix(positions, pts, params.sigma).max(axis=0)
    return np.asarray(phi) * np.exp(-params.delta * lmax * dt).reshape(np.shape(phi))


def decay_full(f: VirtualField, fleet: FleetState, params, m: MappingParams, dt) -> VirtualField:
    # positions are frozen over dt, so the exponential factor is exact
    phi = decay_points(f.phi, f.projected(m), fleet.positions, params, dt)
    return replace(f, phi=phi)


def decay_compressed(g: GroundGrid, fleet: FleetState, params, dt) -> GroundGrid:
    psi = decay_points(g.psi.ravel(), g.gravity_points, fleet.positions, params, dt)
    return replace(g, psi=psi.reshape(g.shape))


def voronoi_assign(fleet: FleetState, g: GroundGrid) -> Partition:
    """Nearest-drone ownership of gravity points; ties go to the lowest index."""
    d = fleet.positions[:, None, :] - g.gravity_points[None, :, :]
    d2 = np.sum(d * d, axis=-1)
    return Partition(owner=np.argmin(d2, axis=0), n_drones=fleet.n)


def metric_I(xi, fleet: FleetState, part: Partition, g: GroundGrid, params) -> float:
    """Importance-removal rate of drone ``xi`` over its own cell."""
    own = part.cell(xi)
    if own.size == 0:
        return 0.0
    lv = performance(fleet.positions[xi], g.gravity_points[own], params.sigma)
    return float(params.delta * g.volume * np.dot(lv, g.psi.ravel()[own]))


def cost_rate_check(fleet: FleetState, part: Partition, g: GroundGrid, params) -> float:
    """Predicted dJ/dt, i.e. minus the sum of all per-drone metrics."""
    return -sum(metric_I(xi, fleet, part, g, params) for xi in range(fleet.n))


def j_near(p, g: GroundGrid, params) -> float:
    """Importance mass within 2 sigma (strict) of ``p``."""
    d = g.gravity_points - np.asarray(p, dtype=float)
    near = np.sum(d * d, axis=1) < (2.0 * params.sigma) ** 2
    return float(g.psi.ravel()[near].sum() * g.volume)
