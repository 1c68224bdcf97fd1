"""Bundled scenarios, the synthetic orchard raster and world assembly from a config."""

from dataclasses import dataclass
from importlib import resources
import hashlib

import numpy as np

from .config import ScenarioConfig, load_config
from .field_model import GroundGrid, MappingParams, compress, discretize, make_grid
from .priority_pipeline import (CategoricalMap, PriorityMap, build_priority,
                                downsample, inflate_to_field)
from .rasters import InputDataError, read_raster


def scenario_path(name: str) -> str:
    """Path of a bundled scenario (``desk`` or ``fullsize``)."""
    ref = resources.files("coversim") / "scenarios" / f"{name}.ini"
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled scenario named {name!r}")
    return str(ref)


def load_scenario(name: str) -> ScenarioConfig:
    return load_config(scenario_path(name))


def synthetic_orchard(width_m=24.0, height_m=39.0, pitch=0.05, seed=7,
                      row_spacing=5.0, canopy_width=1.5, margin=2.5):
    """Binary canopy map of tree rows running along y, with segmentation noise.

    Rows are ``row_spacing`` apart with slowly wobbling canopy edges and the
    odd gap between trees; false-positive specks in the grass and
    false-negative holes in the canopy mimic a raw classifier output.
    """
    rng = np.random.default_rng(seed)
    cols, rows = int(round(width_m / pitch)), int(round(height_m / pitch))
    x = (np.arange(cols) + 0.5) * pitch
    y = (np.arange(rows) + 0.5) * pitch
    canopy = np.zeros((rows, cols), dtype=bool)
    n_rows = int((width_m - 2 * margin) // row_spacing) + 1
    x0 = 0.5 * (width_m - (n_rows - 1) * row_spacing)
    inside_y = (y > margin) & (y < height_m - margin)
    for k in range(n_rows):
        phase, amp = rng.uniform(0, 2 * np.pi), rng.uniform(0.05, 0.2)
        center = x0 + k * row_spacing + amp * np.sin(y / 3.0 + phase)
        half = 0.5 * canopy_width * (1 + 0.15 * np.sin(y / 0.9 + 2 * phase))
        band = np.abs(x[None, :] - center[:, None]) <= half[:, None]
        canopy |= band & inside_y[:, None]
        # occasional missing tree
        for yc in rng.uniform(margin, height_m - margin, size=2):
            gap = np.abs(y - yc) < 0.45
            canopy[np.ix_(gap, np.abs(x - x0 - k * row_spacing) < canopy_width)] = False

    def blobs(count, max_r):
        out = np.zeros_like(canopy)
        for _ in range(count):
            r = rng.integers(0, max_r + 1)
            ci, cj = rng.integers(0, rows), rng.integers(0, cols)
            out[max(ci - r, 0):ci + r + 1, max(cj - r, 0):cj + r + 1] = True
        return out

    specks = blobs(int(rows * cols * 4e-4), 2)
    holes = blobs(int(rows * cols * 4e-4), 1)
    canopy = (canopy | specks) & ~(holes & canopy)
    return CategoricalMap(canopy.astype(np.uint8), pitch)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class World:
    """Everything a run needs: compressed grid, sim-resolution priority and geometry."""

    grid: GroundGrid
    priority: PriorityMap
    mapping: MappingParams
    angle_bins: tuple
    total_phi: float
    kept_phi: float


def load_categorical(cfg: ScenarioConfig) -> CategoricalMap:
    f = cfg.field_model
    if f.raster == "synthetic":
        return synthetic_orchard(f.width_m, f.height_m, f.raster_pitch, f.seed)
    values, pitch, _ = read_raster(f.raster)
    return CategoricalMap((values > 0).astype(np.uint8), pitch)


def priority_for(cfg: ScenarioConfig) -> PriorityMap:
    """Sim-resolution priority map described by ``cfg``."""
    f, p = cfg.field_model, cfg.priority_pipeline
    if f.prebuilt:
        if f.raster == "synthetic":
            raise InputDataError("[field_model] prebuilt requires a raster file")
        values, pitch, meta = read_raster(f.raster)
        pm = PriorityMap(values, pitch)
    else:
        pm = build_priority(load_categorical(cfg), p.close_r, p.open_r, p.avg_r, p.phi_max)
    return downsample(pm, f.downsample)


def prepare(cfg: ScenarioConfig) -> World:
    f = cfg.field_model
    pm = priority_for(cfg)
    mapping = MappingParams(z_c=f.z_c)
    bounds = pm.extent
    field = inflate_to_field(pm, discretize(bounds, (pm.pitch, pm.pitch),
                                            (f.angle_bins_h, f.angle_bins_v)))
    grid = compress(field, make_grid(bounds, (f.grid_rows, f.grid_cols)), mapping)
    return World(grid=grid, priority=pm, mapping=mapping,
                 angle_bins=(f.angle_bins_h, f.angle_bins_v),
                 total_phi=float(field.phi.sum()), kept_phi=float(grid.psi.sum()))
