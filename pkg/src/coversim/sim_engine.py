"""
Closed-loop simulation: partition, per-drone CBF-QP control, compressed decay
and single-integrator motion at a fixed control period.

Each logged row holds the state at t_k and the control computed from it;
that control is then held over [t_k, t_k + dt]. Importance decays with the
positions frozen at t_k (exact exponential), positions advance by explicit
Euler.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import csv
import logging
import math
import os

import numpy as np

from .cbf_controller import ControlOutput, ControllerParams, compute_control
from .coverage_dynamics import (FleetState, decay_compressed, decay_points, j_near,
                                voronoi_assign)
from .field_model import GroundGrid, MappingParams, angle_bin_centers, objective_J, project_array

log = logging.getLogger(__name__)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("COVERSIM_THREADS", "1")))
    except ValueError:
        return 1


def min_pairwise_distance(positions) -> float:
    p = np.asarray(positions)
    if len(p) < 2:
        return math.inf
    d = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
    return float(d[np.triu_indices(len(p), k=1)].min())


class CheckpointTracker:
    """Full per-angle importance kept only at a few (x, y, z) target points."""

    def __init__(self, points, phi0, angle_bins, mapping: MappingParams):
        self.points = np.asarray(points, dtype=float).reshape(-1, 3)
        nh, nv = angle_bins
        self.theta_h, self.theta_v, _, _ = angle_bin_centers(nh, nv)
        self.phi = np.asarray(phi0, dtype=float).reshape(len(self.points), nh, nv).copy()
        P = self.points
        self.proj = project_array(P[:, 0, None, None], P[:, 1, None, None], P[:, 2, None, None],
                                  self.theta_h[None, :, None], self.theta_v[None, None, :],
                                  mapping.z_c)

    def update(self, positions, params, dt):
        if len(self.points):
            self.phi = decay_points(self.phi, self.proj, positions, params, dt)

    def tables(self):
        """Per point, rows of (theta_h, theta_v, phi)."""
        TH, TV = np.meshgrid(self.theta_h, self.theta_v, indexing="ij")
        return [np.column_stack([TH.ravel(), TV.ravel(), ph.ravel()]) for ph in self.phi]


def checkpoint_phi0(points, priority, angle_bins):
    """Initial per-angle importance at each point: the raster pixel value spread uniformly."""
    nh, nv = angle_bins
    out = np.zeros((len(points), nh, nv))
    rows, cols = priority.shape
    for k, (x, y, _z) in enumerate(points):
        i, j = int(math.floor(y / priority.pitch)), int(math.floor(x / priority.pitch))
        if 0 <= i < rows and 0 <= j < cols:
            out[k] = priority.values[i, j] / (nh * nv)
    return out


def track_checkpoints(points, phi0, angle_bins, history, params, mapping, dt):
    """Replay a sequence of fleet positions over the check points.

    ``history`` holds one (N, 2) position array per step; returns the tables
    after the last step.
    """
    tr = CheckpointTracker(points, phi0, angle_bins, mapping)
    for pos in history:
        tr.update(pos, params, dt)
    return tr.tables()


@dataclass
class SimState:
    k: int
    t: float
    fleet: FleetState
    grid: GroundGrid


@dataclass
class SimLog:
    n_drones: int
    t: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    J: list = field(default_factory=list)
    J_near: list = field(default_factory=list)
    min_dist: list = field(default_factory=list)
    h: list = field(default_factory=list)
    fallbacks: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)

    def record(self, state: SimState, ctrl, params):
        self.t.append(state.t)
        self.positions.append(state.fleet.positions.copy())
        self.controls.append(np.array([c.u for c in ctrl]))
        self.J.append(objective_J(state.grid))
        self.J_near.append(j_near(state.fleet.positions[0], state.grid, params))
        self.min_dist.append(min_pairwise_distance(state.fleet.positions))
        self.h.append(np.array([c.h for c in ctrl]))
        self.fallbacks.append(sum(c.fallback for c in ctrl))

    @property
    def speeds(self) -> np.ndarray:
        c = np.asarray(self.controls)
        return np.hypot(c[..., 0], c[..., 1])

    def columns(self):
        cols = ["step", "t", "J", "J_near", "min_dist", "fallbacks"]
        for i in range(1, self.n_drones + 1):
            cols += [f"x_{i}", f"y_{i}", f"ux_{i}", f"uy_{i}", f"speed_{i}", f"h_{i}"]
        return cols

    def rows(self):
        speeds = self.speeds
        for k in range(len(self.t)):
            row = [str(k)] + [f"{v:.9g}" for v in (self.t[k], self.J[k], self.J_near[k], self.min_dist[k])]
            row.append(str(self.fallbacks[k]))
            for i in range(self.n_drones):
                p, u = self.positions[k][i], self.controls[k][i]
                row += [f"{v:.9g}" for v in (p[0], p[1], u[0], u[1], speeds[k][i], self.h[k][i])]
            yield row

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            w.writerows(self.rows())

    def write_checkpoints(self, path, points):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "point", "x", "y", "z", "theta_h", "theta_v", "phi"])
            for t, tables in self.checkpoints:
                for k, tab in enumerate(tables):
                    x, y, z = points[k]
                    for th, tv, ph in tab:
                        w.writerow([f"{t:.9g}", k + 1] + [f"{v:.9g}" for v in (x, y, z, th, tv, ph)])


def controls(fleet: FleetState, grid: GroundGrid, params, pool=None) -> list:
    part = voronoi_assign(fleet, grid)
    if pool is None:
        return [compute_control(xi, fleet, part, grid, params) for xi in range(fleet.n)]
    return list(pool.map(lambda xi: compute_control(xi, fleet, part, grid, params), range(fleet.n)))


def step(state: SimState, params, dt, ctrl=None, tracker=None, pool=None):
    """Advance one control period. ``ctrl`` may carry controls already computed at ``state``."""
    if ctrl is None:
        ctrl = controls(state.fleet, state.grid, params, pool)
    u = np.array([c.u for c in ctrl])
    grid = decay_compressed(state.grid, state.fleet, params, dt)
    if tracker is not None:
        tracker.update(state.fleet.positions, params, dt)
    fleet = FleetState(state.fleet.positions + u * dt, u)
    return SimState(k=state.k + 1, t=(state.k + 1) * dt, fleet=fleet, grid=grid)


def simulate(grid: GroundGrid, positions, params: ControllerParams, dt=0.05, t_end=600.0,
             stop_ratio=0.01, snapshot_every=0.0, tracker=None) -> SimLog:
    """Run from ``positions`` until ``t_end`` or J/J(0) < stop_ratio."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    fleet = FleetState(positions)
    state = SimState(k=0, t=0.0, fleet=fleet, grid=grid)
    out = SimLog(n_drones=fleet.n)
    n_steps = int(math.floor(t_end / dt + 1e-9))
    snap_k = int(round(snapshot_every / dt)) if snapshot_every > 0 else 0
    J0 = objective_J(grid)
    workers = min(worker_count(), fleet.n)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        while True:
            ctrl = controls(state.fleet, state.grid, params, pool)
            out.record(state, ctrl, params)
            done = state.k >= n_steps or J0 == 0 or out.J[-1] < stop_ratio * J0
            if snap_k and (state.k % snap_k == 0 or done):
                out.snapshots.append((state.t, state.grid.psi.copy()))
                if tracker is not None:
                    out.checkpoints.append((state.t, tracker.tables()))
            if done:
                break
            state = step(state, params, dt, ctrl=ctrl, tracker=tracker)
    finally:
        if pool is not None:
            pool.shutdown()
    for t, n in zip(out.t, out.fallbacks):
        if n:
            log.info("t=%.3f: %d drone(s) used the repulsion fallback", t, n)
    return out


def run(cfg, world=None) -> SimLog:
    """Prepare the scenario described by ``cfg`` and simulate it."""
    from .scenarios import prepare

    world = world or prepare(cfg)
    s = cfg.sim_engine
    tracker = None
    if s.checkpoints:
        phi0 = checkpoint_phi0(s.checkpoints, world.priority, world.angle_bins)
        tracker = CheckpointTracker(s.checkpoints, phi0, world.angle_bins, world.mapping)
    return simulate(world.grid, np.array(s.positions), cfg.cbf_controller, dt=s.dt,
                    t_end=s.t_end, stop_ratio=s.stop_ratio,
                    snapshot_every=s.snapshot_every, tracker=tracker)
