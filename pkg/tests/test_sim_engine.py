import csv
import math

import numpy as np
import pytest

from coversim.cbf_controller import CoincidentDronesError, ControllerParams
from coversim.coverage_dynamics import FleetState, PerfParams, decay_full
from coversim.field_model import GroundGrid, MappingParams, discretize, objective_J
from coversim.sim_engine import (CheckpointTracker, SimState, min_pairwise_distance, simulate, step,
                                 track_checkpoints, worker_count)

from conftest import random_grid

TABLE1 = ControllerParams()
P5 = PerfParams(1.0, 5.0)


def hot_grid(psi=100.0):
    return GroundGrid(origin=(0, 0), cell=(1, 1), shape=(1, 1), psi=[psi], volume=1.0)


class TestStep:
    def test_empty_field_positions_unchanged(self, rng):
        g = random_grid(rng).with_psi(np.zeros((6, 6)))
        pos = np.array([[1.0, 1.0], [4.0, 2.5]])
        log = simulate(g, pos, TABLE1, dt=0.05, t_end=1.0, stop_ratio=0.0)
        assert np.all(log.speeds == 0)
        assert all(np.array_equal(p, pos) for p in log.positions)

    def test_hot_polygon_j_strictly_decreases(self):
        log = simulate(hot_grid(), [[0.5, 0.5]], TABLE1, dt=0.05, t_end=1.0, stop_ratio=0.0)
        assert np.all(np.diff(log.J) < 0)

    def test_step_bound(self, rng):
        g = random_grid(rng, shape=(8, 8))
        log = simulate(g, rng.uniform(0, 8, (3, 2)), TABLE1, dt=0.05, t_end=3.0, stop_ratio=0.0)
        P = np.array(log.positions)
        moved = np.linalg.norm(np.diff(P, axis=0), axis=-1)
        assert np.all(moved <= TABLE1.u_max * 0.05 * (1 + 1e-12))

    def test_mirror_symmetry(self, rng):
        # axis x = 3 lies on a polygon boundary, so no Voronoi tie sits on it
        psi = rng.uniform(0, 50, (6, 6))
        g = random_grid(rng).with_psi(psi + psi[:, ::-1])
        log = simulate(g, [[1.25, 2.0], [4.75, 2.0]], TABLE1, dt=0.05, t_end=5.0, stop_ratio=0.0)
        P = np.array(log.positions)
        assert np.abs(P[:, 0, 0] + P[:, 1, 0] - 6.0).max() <= 1e-9
        assert np.abs(P[:, 0, 1] - P[:, 1, 1]).max() <= 1e-9

    def test_coincident_drones_abort(self, rng):
        with pytest.raises(CoincidentDronesError):
            simulate(random_grid(rng), [[1, 1], [1, 1]], TABLE1, t_end=0.1)

    def test_step_advances_time(self):
        s = SimState(k=0, t=0.0, fleet=FleetState([[0.5, 0.5]]), grid=hot_grid())
        s2 = step(s, TABLE1, 0.05)
        assert s2.k == 1 and s2.t == 0.05
        assert s2.grid.psi.item() < 100.0


class TestSimulate:
    def test_t_end_zero_single_row(self, rng):
        log = simulate(random_grid(rng), [[1, 1]], TABLE1, t_end=0.0)
        assert len(log.t) == 1 and log.t[0] == 0

    def test_row_count_and_time(self, rng):
        log = simulate(random_grid(rng), [[1, 1], [3, 3]], TABLE1, dt=0.05, t_end=0.5, stop_ratio=0.0)
        assert len(log.t) == 11
        assert np.all(np.diff(log.t) > 0)
        assert log.t[-1] == pytest.approx(0.5)

    def test_stops_on_ratio(self):
        log = simulate(hot_grid(), [[0.5, 0.5]], TABLE1, dt=0.05, t_end=100.0, stop_ratio=0.5)
        assert log.J[-1] < 0.5 * log.J[0] <= log.J[-2]

    def test_empty_field_stops_at_once(self, rng):
        g = random_grid(rng).with_psi(np.zeros((6, 6)))
        assert len(simulate(g, [[1, 1]], TABLE1, t_end=10.0).t) == 1

    def test_j_non_increasing(self, rng):
        g = random_grid(rng, shape=(8, 8))
        log = simulate(g, [[0.5, 0.5], [7.5, 7.5]], TABLE1, dt=0.05, t_end=5.0, stop_ratio=0.0)
        assert np.all(np.diff(log.J) <= 1e-12)

    def test_snapshots(self, rng):
        log = simulate(random_grid(rng), [[1, 1]], TABLE1, dt=0.05, t_end=1.0, stop_ratio=0.0,
                       snapshot_every=0.5)
        assert [t for t, _ in log.snapshots] == pytest.approx([0.0, 0.5, 1.0])

    def test_threads_do_not_change_result(self, rng, monkeypatch):
        g = random_grid(rng, shape=(8, 8))
        pos = [[0.5, 0.5], [7.5, 7.5], [4, 1]]
        a = simulate(g, pos, TABLE1, dt=0.05, t_end=2.0, stop_ratio=0.0)
        monkeypatch.setenv("COVERSIM_THREADS", "3")
        assert worker_count() == 3
        b = simulate(g, pos, TABLE1, dt=0.05, t_end=2.0, stop_ratio=0.0)
        assert list(a.rows()) == list(b.rows())

    def test_bad_dt(self, rng):
        with pytest.raises(ValueError):
            simulate(random_grid(rng), [[1, 1]], TABLE1, dt=0.0)

    def test_csv_columns(self, rng, tmp_path):
        log = simulate(random_grid(rng), [[1, 1], [3, 3]], TABLE1, dt=0.05, t_end=0.2, stop_ratio=0.0)
        path = tmp_path / "log.csv"
        log.write_csv(path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0][:6] == ["step", "t", "J", "J_near", "min_dist", "fallbacks"]
        assert rows[0][6:12] == ["x_1", "y_1", "ux_1", "uy_1", "speed_1", "h_1"]
        assert len(rows[0]) == 6 + 2 * 6
        assert len(rows) == 1 + 5
        assert rows[1][1] == "0" and rows[1][4] == f"{math.hypot(2, 2):.9g}"


class TestCheckpoints:
    def test_never_approached(self):
        phi0 = np.full((1, 4, 3), 2.0)
        tabs = track_checkpoints([(0, 0, 0)], phi0, (4, 3), [np.array([[1e4, 1e4]])] * 50,
                                 P5, MappingParams(10), 0.05)
        assert np.all(tabs[0][:, 2] == 2.0)

    def test_parked_on_one_bin(self):
        tr = CheckpointTracker([(0, 0, 0)], np.ones((1, 4, 3)), (4, 3), MappingParams(10))
        target = tr.proj[0, 1, 0]
        for _ in range(20):
            tr.update(np.array([target]), P5, 0.05)
        phi = tr.phi[0]
        assert phi[1, 0] == pytest.approx(math.exp(-5.0), rel=1e-12)
        others = np.delete(phi.ravel(), 1 * 3 + 0)
        assert others.min() > 50 * phi[1, 0]

    def test_matches_decay_full(self, rng):
        m = MappingParams(10)
        f = discretize((2.0, 3.0, 4.0, 5.0), (1, 1), (2, 1))
        f = f.with_phi(np.array([3.0, 5.0]).reshape(f.shape))
        history = [rng.uniform(-8, 12, (2, 2)) for _ in range(30)]
        tabs = track_checkpoints([(2.5, 4.5, 0.0)], f.phi.reshape(1, 2, 1), (2, 1), history, P5, m, 0.05)
        for pos in history:
            f = decay_full(f, FleetState(pos), P5, m, 0.05)
        np.testing.assert_allclose(tabs[0][:, 2], f.phi.ravel(), rtol=1e-13)
        np.testing.assert_allclose(tabs[0][:, 0], f.theta_h)


def test_min_pairwise_distance():
    assert min_pairwise_distance([[0, 0]]) == math.inf
    assert min_pairwise_distance([[0, 0], [3, 4], [10, 0]]) == 5.0
