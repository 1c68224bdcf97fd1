"""
Categorical canopy raster -> initial importance field.

closing -> opening -> float -> circular mean filter -> peak rescale, then an
optional block-mean downsample to simulator resolution and a uniform spread
over the angular bins of the virtual field.

Border policy: pixels outside the raster never contribute. For binary
morphology this means dilation sees zeros and erosion sees ones beyond the
edge; the mean filter averages in-bounds pixels only.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .field_model import VirtualField


@dataclass
class CategoricalMap:
    values: np.ndarray
    pitch: float

    def __post_init__(self):
        self.values = np.asarray(self.values).astype(np.uint8)
        if self.values.ndim != 2:
            raise ValueError("categorical map must be 2D")
        if not np.isin(self.values, (0, 1)).all():
            raise ValueError("categorical values must be 0 or 1")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")

    @property
    def shape(self):
        return self.values.shape


@dataclass
class PriorityMap:
    values: np.ndarray
    pitch: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("priority map must be 2D")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("priority values must be finite and nonnegative")
        if not self.pitch > 0:
            raise ValueError("pitch must be positive")

    @property
    def shape(self):
        return self.values.shape

    @property
    def extent(self):
        rows, cols = self.shape
        return (0.0, cols * self.pitch, 0.0, rows * self.pitch)


def circular_se(radius_px: int) -> np.ndarray:
    """Boolean disk mask of side 2r+1: (i, j) set iff i^2 + j^2 <= r^2."""
    r = int(radius_px)
    if r < 0:
        raise ValueError("radius must be nonnegative")
    i, j = np.mgrid[-r:r + 1, -r:r + 1]
    return i * i + j * j <= r * r


def dilate(values, radius_px):
    return ndimage.binary_dilation(values, structure=circular_se(radius_px), border_value=0)


def erode(values, radius_px):
    return ndimage.binary_erosion(values, structure=circular_se(radius_px), border_value=1)


def morph_close(m: CategoricalMap, radius_px: int) -> CategoricalMap:
    out = erode(dilate(m.values.astype(bool), radius_px), radius_px)
    return CategoricalMap(out, m.pitch)


def morph_open(m: CategoricalMap, radius_px: int) -> CategoricalMap:
    out = dilate(erode(m.values.astype(bool), radius_px), radius_px)
    return CategoricalMap(out, m.pitch)


def average_filter(m: PriorityMap, radius_px: int) -> PriorityMap:
    """Mean over the in-bounds part of a disk around each pixel."""
    k = circular_se(radius_px).astype(float)
    total = ndimage.correlate(m.values, k, mode="constant", cval=0.0)
    count = ndimage.correlate(np.ones_like(m.values), k, mode="constant", cval=0.0)
    out = total / count
    # keep the contraction property exact against round-off
    out = np.clip(out, m.values.min(), m.values.max())
    return PriorityMap(out, m.pitch)


def rescale(m: PriorityMap, phi_max: float = 1.0) -> PriorityMap:
    """Scale so the peak equals ``phi_max``; zero stays zero."""
    peak = m.values.max()
    if peak == 0:
        return PriorityMap(np.zeros_like(m.values), m.pitch)
    return PriorityMap(m.values * (phi_max / peak), m.pitch)


def build_priority(m: CategoricalMap, close_r=5, open_r=10, avg_r=None, phi_max=1.0) -> PriorityMap:
    if avg_r is None:
        raise ValueError("averaging radius avg_r is required")
    refined = morph_open(morph_close(m, close_r), open_r)
    smooth = average_filter(PriorityMap(refined.values.astype(float), m.pitch), avg_r)
    return rescale(smooth, phi_max)


def downsample(m: PriorityMap, factor: int) -> PriorityMap:
    """Block mean over ``factor x factor`` tiles; trailing partial tiles are cut."""
    f = int(factor)
    if f < 1:
        raise ValueError("downsample factor must be >= 1")
    if f == 1:
        return m
    rows, cols = m.shape[0] // f, m.shape[1] // f
    if rows == 0 or cols == 0:
        raise ValueError("raster smaller than one downsample block")
    v = m.values[:rows * f, :cols * f].reshape(rows, f, cols, f).mean(axis=(1, 3))
    return PriorityMap(v, m.pitch * f)


def inflate_to_field(pm: PriorityMap, target: VirtualField) -> VirtualField:
    """Spread each pixel's importance evenly over the angular bins of ``target``.

    Raster row i maps to field y index i (row 0 at the low-y edge).
    """
    ny, nx, nh, nv = target.shape
    if pm.shape != (ny, nx):
        raise ValueError(f"raster {pm.shape} does not match field ground grid {(ny, nx)}")
    phi = np.broadcast_to(pm.values[:, :, None, None] / (nh * nv), target.shape).copy()
    return target.with_phi(phi)
