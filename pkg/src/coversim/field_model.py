"""
5D virtual field over (x, y, z, theta_h, theta_v), its projection onto the
drone plane and the compression of per-cell importance onto a 2D polygon grid.

Ground is flat (z = 0 for every target cell). Angular bins cover
theta_h in [-pi, pi) and theta_v in (0, pi/2], with bin centers strictly
inside the interval so the theta_v -> 0 singularity is never sampled.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
import math

import numpy as np

from .rasters import write_csv_raster


@dataclass(frozen=True)
class VirtualPoint:
    x: float
    y: float
    z: float
    theta_h: float
    theta_v: float


@dataclass(frozen=True)
class MappingParams:
    z_c: float = 10.0


def project(q: VirtualPoint, m: MappingParams) -> np.ndarray:
    """Drone-plane position from which ``q`` is seen at its viewing angles."""
    out = project_array(q.x, q.y, q.z, q.theta_h, q.theta_v, m.z_c)
    return np.asarray(out, dtype=float)


def project_array(x, y, z, theta_h, theta_v, z_c):
    """Vectorized projection; inputs broadcast. Returns an array of shape (..., 2)."""
    theta_v = np.asarray(theta_v, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(theta_v <= 0.0) or np.any(theta_v > math.pi / 2):
        raise ValueError("theta_v must lie in (0, pi/2]")
    if np.any(z >= z_c):
        raise ValueError(f"altitude z_c={z_c} must exceed every target height")
    reach = (z_c - z) * np.tan(math.pi / 2 - theta_v)
    px = x - reach * np.cos(theta_h)
    py = y - reach * np.sin(theta_h)
    return np.stack(np.broadcast_arrays(px, py), axis=-1)


@dataclass
class VirtualField:
    """Regular 5D grid. ``phi`` has shape (ny, nx, nh, nv)."""

    x: np.ndarray
    y: np.ndarray
    theta_h: np.ndarray
    theta_v: np.ndarray
    spacing: tuple
    bin_widths: tuple
    phi: np.ndarray
    z: float = 0.0

    @property
    def cell_volume(self) -> float:
        dx, dy = self.spacing
        dh, dv = self.bin_widths
        return dx * dy * dh * dv

    @property
    def n_cells(self) -> int:
        return self.phi.size

    @property
    def shape(self):
        return self.phi.shape

    def projected(self, m: MappingParams) -> np.ndarray:
        """Projection of every cell center, shape (ny, nx, nh, nv, 2)."""
        X = self.x[None, :, None, None]
        Y = self.y[:, None, None, None]
        TH = self.theta_h[None, None, :, None]
        TV = self.theta_v[None, None, None, :]
        return project_array(X, Y, self.z, TH, TV, m.z_c)

    def with_phi(self, phi) -> "VirtualField":
        phi = np.asarray(phi, dtype=float)
        if phi.shape != self.phi.shape:
            raise ValueError(f"phi shape {phi.shape} != field shape {self.phi.shape}")
        if np.any(phi < 0):
            raise ValueError("importance must be nonnegative")
        return replace(self, phi=phi)


def angle_bin_centers(nh: int, nv: int):
    """Bin centers and widths for theta_h in [-pi, pi) and theta_v in (0, pi/2]."""
    dh = 2 * math.pi / nh
    dv = (math.pi / 2) / nv
    th = -math.pi + (np.arange(nh) + 0.5) * dh
    tv = (np.arange(nv) + 0.5) * dv
    return th, tv, dh, dv


def _cell_count(extent, step, name):
    n = extent / step
    k = int(round(n))
    if k < 1:
        raise ValueError(f"zero-sized field along {name}")
    if abs(n - k) > 1e-6 * max(1.0, n):
        raise ValueError(f"{name} extent {extent} is not a multiple of spacing {step}")
    return k


def discretize(bounds, spacings, angle_bins) -> VirtualField:
    """Build an all-zero virtual field.

    bounds = (x0, x1, y0, y1) in meters, spacings = (dx, dy),
    angle_bins = (n_theta_h, n_theta_v). Cells sit at bin centers.
    """
    x0, x1, y0, y1 = bounds
    dx, dy = spacings
    nh, nv = angle_bins
    if dx <= 0 or dy <= 0:
        raise ValueError("spacings must be positive")
    if nh < 1 or nv < 1:
        raise ValueError("angle bin counts must be positive")
    nx = _cell_count(x1 - x0, dx, "x")
    ny = _cell_count(y1 - y0, dy, "y")
    th, tv, dh, dv = angle_bin_centers(nh, nv)
    return VirtualField(
        x=x0 + (np.arange(nx) + 0.5) * dx,
        y=y0 + (np.arange(ny) + 0.5) * dy,
        theta_h=th,
        theta_v=tv,
        spacing=(float(dx), float(dy)),
        bin_widths=(dh, dv),
        phi=np.zeros((ny, nx, nh, nv)),
    )


@dataclass
class GroundGrid:
    """Equal rectangles over the drone plane, row-major (row = y index).

    ``volume`` is the 5D cell volume A used by the objective, not the polygon
    area. ``dropped`` counts 5D cells whose projection missed the grid when
    the grid was filled by :func:`compress`.
    """

    origin: tuple
    cell: tuple
    shape: tuple
    psi: np.ndarray
    volume: float = 1.0
    dropped: int = 0
    counts: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=float).reshape(self.shape)
        if np.any(self.psi < 0):
            raise ValueError("psi must be nonnegative")

    @property
    def polygon_area(self) -> float:
        return self.cell[0] * self.cell[1]

    @property
    def n_polygons(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def extent(self):
        x0, y0 = self.origin
        return (x0, x0 + self.cell[0] * self.shape[1], y0, y0 + self.cell[1] * self.shape[0])

    @cached_property
    def gravity_points(self) -> np.ndarray:
        """Polygon centroids, shape (n_polygons, 2), row-major."""
        ny, nx = self.shape
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.cell[0]
        ys = self.origin[1] + (np.arange(ny) + 0.5) * self.cell[1]
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def polygon_index(self, points) -> np.ndarray:
        """Flat polygon index per point, -1 outside. Rectangles are half-open."""
        pts = np.asarray(points, dtype=float)
        col = np.floor((pts[..., 0] - self.origin[0]) / self.cell[0])
        row = np.floor((pts[..., 1] - self.origin[1]) / self.cell[1])
        ny, nx = self.shape
        inside = (col >= 0) & (col < nx) & (row >= 0) & (row < ny)
        idx = np.where(inside, row * nx + col, -1)
        return idx.astype(np.int64)

    def with_psi(self, psi) -> "GroundGrid":
        return replace(self, psi=np.asarray(psi, dtype=float).reshape(self.shape))


def make_grid(bounds, shape, volume=1.0) -> GroundGrid:
    """Empty grid of ``shape = (rows, cols)`` polygons covering ``bounds``."""
    x0, x1, y0, y1 = bounds
    ny, nx = shape
    if nx < 1 or ny < 1 or x1 <= x0 or y1 <= y0:
        raise ValueError("grid must have positive size")
    cell = ((x1 - x0) / nx, (y1 - y0) / ny)
    return GroundGrid(origin=(x0, y0), cell=cell, shape=(ny, nx),
                      psi=np.zeros((ny, nx)), volume=volume)


def compress(f: VirtualField, g: GroundGrid, m: MappingParams) -> GroundGrid:
    """Sum phi of all cells whose projection lands in each polygon.

    Cells projecting outside the grid are dropped and counted.
    """
    proj = f.projected(m).reshape(-1, 2)
    idx = g.polygon_index(proj)
    kept = idx >= 0
    phi = f.phi.reshape(-1)
    psi = np.bincount(idx[kept], weights=phi[kept], minlength=g.n_polygons)
    counts = np.bincount(idx[kept], minlength=g.n_polygons)
    return replace(g, psi=psi.reshape(g.shape), volume=f.cell_volume,
                   dropped=int((~kept).sum()), counts=counts.reshape(g.shape))


def kept_mass(f: VirtualField, g: GroundGrid, m: MappingParams) -> float:
    """Total phi over cells that project inside ``g``."""
    idx = g.polygon_index(f.projected(m).reshape(-1, 2))
    return float(f.phi.reshape(-1)[idx >= 0].sum())


def objective_J(g: GroundGrid) -> float:
    return float(g.psi.sum() * g.volume)


def write_psi_raster(path, g: GroundGrid):
    """Snapshot of psi in the CSV raster format."""
    write_csv_raster(path, g.psi, g.cell[0], pitch_y=g.cell[1])
