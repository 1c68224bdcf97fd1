"""Shared fixtures and independent brute-force oracles."""

import itertools
import math

import numpy as np
import pytest

from coversim.field_model import GroundGrid

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# -- morphology / filtering -------------------------------------------------

def disk_offsets(r):
    return [(i, j) for i in range(-r, r + 1) for j in range(-r, r + 1) if i * i + j * j <= r * r]


def bf_dilate(x, r):
    """Any set pixel under the disk; out-of-bounds pixels are ignored."""
    rows, cols = x.shape
    out = np.zeros_like(x, dtype=bool)
    offs = disk_offsets(r)
    for i in range(rows):
        for j in range(cols):
            out[i, j] = any(x[i + di, j + dj] for di, dj in offs
                            if 0 <= i + di < rows and 0 <= j + dj < cols)
    return out


def bf_erode(x, r):
    """All in-bounds pixels under the disk set."""
    rows, cols = x.shape
    out = np.zeros_like(x, dtype=bool)
    offs = disk_offsets(r)
    for i in range(rows):
        for j in range(cols):
            out[i, j] = all(x[i + di, j + dj] for di, dj in offs
                            if 0 <= i + di < rows and 0 <= j + dj < cols)
    return out


def bf_close(x, r):
    return bf_erode(bf_dilate(x, r), r)


def bf_open(x, r):
    return bf_dilate(bf_erode(x, r), r)


def bf_mean(x, r):
    rows, cols = x.shape
    out = np.zeros((rows, cols))
    offs = disk_offsets(r)
    for i in range(rows):
        for j in range(cols):
            vals = [x[i + di, j + dj] for di, dj in offs if 0 <= i + di < rows and 0 <= j + dj < cols]
            out[i, j] = sum(vals) / len(vals)
    return out


# -- projection / compression ---------------------------------------------

def hand_project(x, y, z, th, tv, zc):
    r = (zc - z) * math.tan(math.pi / 2 - tv)
    return x - r * math.cos(th), y - r * math.sin(th)


def compress_oracle(f, g, zc):
    """Scalar loop: per-polygon sums and kept mass."""
    psi = np.zeros(g.shape)
    kept = 0.0
    x0, y0 = g.origin
    for iy, y in enumerate(f.y):
        for ix, x in enumerate(f.x):
            for ih, th in enumerate(f.theta_h):
                for iv, tv in enumerate(f.theta_v):
                    px, py = hand_project(x, y, 0.0, th, tv, zc)
                    col = math.floor((px - x0) / g.cell[0])
                    row = math.floor((py - y0) / g.cell[1])
                    if 0 <= col < g.shape[1] and 0 <= row < g.shape[0]:
                        v = f.phi[iy, ix, ih, iv]
                        psi[row, col] += v
                        kept += v
    return psi, kept


# -- QP ----------------------------------------------------------------------

def grid_qp_oracle(qp, box=2.0):
    """Brute-force minimum of eps|u|^2 + w^2 over a (u_x, u_y) lattice.

    w enters only through the soft row (w <= row value) and the objective, so
    for each lattice u the best w is min(0, soft row value) exactly. The
    lattice is refined three times (0.02, 0.005, 0.001) around the incumbent.
    Returns (objective, u) of the best feasible lattice point, or (inf, None).
    """
    g, b0 = qp.A[0, :2], qp.b[0]
    H, hb = qp.A[1:, :2], qp.b[1:]

    def evaluate(ux, uy):
        U = np.stack([ux.ravel(), uy.ravel()], axis=1)
        feas = np.all(U @ H.T >= hb, axis=1) if len(hb) else np.ones(len(U), bool)
        w = np.minimum(0.0, U @ g - b0)
        f = qp.epsilon * np.sum(U * U, axis=1) + w * w
        f[~feas] = np.inf
        k = int(np.argmin(f))
        return f[k], U[k]

    best_f, best_u = np.inf, None
    center, half = np.zeros(2), box
    for step in (0.02, 0.005, 0.001):
        n = int(round(half / step))
        ax = np.arange(-n, n + 1) * step
        ux, uy = np.meshgrid(center[0] + ax, center[1] + ax)
        f, u = evaluate(ux, uy)
        if f < best_f:
            best_f, best_u = f, u
        if best_u is None:
            return np.inf, None
        center = np.round(best_u / step) * step
        half = 25 * step
    return float(best_f), best_u


def random_qp(rng, n_hard=None):
    """Feasible 3-variable instance whose optimum sits well inside [-2, 2]^3."""
    from coversim.cbf_controller import QPProblem

    eps = rng.uniform(0.2, 1.0)
    k = rng.integers(0, 3) if n_hard is None else n_hard
    A = [np.r_[rng.uniform(-1, 1, 2), -1.0]]
    b = [rng.uniform(-1, 1)]
    u0 = rng.uniform(-0.5, 0.5, 2)
    for _ in range(k):
        r = rng.uniform(-1, 1, 2)
        A.append(np.r_[r, 0.0])
        b.append(r @ u0 - rng.uniform(0.0, 0.5))
    return QPProblem(epsilon=eps, A=np.array(A), b=np.array(b))


# -- grids -------------------------------------------------------------------

def random_grid(rng, shape=(6, 6), cell=(1.0, 1.0), volume=None):
    psi = rng.uniform(0, 10, shape)
    return GroundGrid(origin=(0.0, 0.0), cell=cell, shape=shape, psi=psi,
                      volume=rng.uniform(0.1, 2.0) if volume is None else volume)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
