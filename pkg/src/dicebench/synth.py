"""Synthetic smooth marginals: disc, Gaussian blur, random smooth warp.

Lengths (radius, blur width, warp amplitude/correlation) are in domain
units; the domain is the unit square, so one unit spans ``dims[k]`` pixels
along axis k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidRadius
from .grid import MarginalMap, Rng

TRUNCATE_SIGMAS = 4.0


@dataclass(frozen=True)
class SynthConfig:
    dims: tuple[int, int] = (200, 200)
    radius: float = 0.2
    rho: float = 0.01
    deform_amplitude: float = 0.05
    deform_correlation: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.dims) != 2:
            raise ValueError("synthetic marginals are 2D")
        if self.rho < 0 or self.deform_amplitude < 0 or self.deform_correlation <= 0:
            raise ValueError("rho, amplitude must be >= 0 and correlation > 0")


def make_ball(dims, radius: float) -> MarginalMap:
    if not 0.0 < radius <= 0.5:
        raise InvalidRadius(f"radius must lie in (0, 0.5], got {radius}")
    dims = tuple(dims)
    axes = [(np.arange(d) + 0.5) / d - 0.5 for d in dims]
    mesh = np.meshgrid(*axes, indexing="ij")
    r2 = sum(a * a for a in mesh)
    inside = r2 <= radius * radius
    if not inside.any():
        # radius below half a cell: keep the cell(s) nearest the center
        inside = r2 == r2.min()
        inside.flat[np.flatnonzero(inside)[1:]] = False
    return MarginalMap(dims, inside.astype(np.float64).ravel())


def _blur_array(a: np.ndarray, sigma_px) -> np.ndarray:
    # scipy builds a 4-sigma truncated kernel normalized to unit sum
    return ndimage.gaussian_filter(a, sigma=sigma_px, mode="constant", cval=0.0, truncate=TRUNCATE_SIGMAS)


def gaussian_blur(m: MarginalMap, rho: float) -> MarginalMap:
    """Separable Gaussian blur with standard deviation ``rho``, zero padded."""
    if rho < 0:
        raise ValueError("rho must be >= 0")
    if rho == 0:
        return MarginalMap(m.dims, m.cells.copy())
    out = _blur_array(m.array, [rho * d for d in m.dims])
    return MarginalMap(m.dims, np.clip(out, 0.0, 1.0).ravel())


def displacement_field(dims, amplitude: float, correlation: float, rng: Rng) -> list[np.ndarray]:
    """Per-axis pixel displacements: smoothed white noise rescaled to RMS ``amplitude``."""
    fields = []
    for k, d in enumerate(dims):
        noise = rng.normal(tuple(dims))
        smooth = _blur_array(noise, [correlation * e for e in dims])
        rms = float(np.sqrt(np.mean(smooth * smooth)))
        fields.append(smooth * (amplitude * d / rms) if rms > 0 else np.zeros(dims))
    return fields


def random_deformation(m: MarginalMap, amplitude: float, correlation: float, rng: Rng) -> MarginalMap:
    """Warp ``m`` along a random smooth field (bilinear, clamp-to-edge)."""
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    if amplitude == 0:
        return MarginalMap(m.dims, m.cells.copy())
    disp = displacement_field(m.dims, amplitude, correlation, rng)
    grid = np.meshgrid(*[np.arange(d, dtype=np.float64) for d in m.dims], indexing="ij")
    coords = np.stack([g + dk for g, dk in zip(grid, disp)])
    out = ndimage.map_coordinates(m.array, coords, order=1, mode="nearest")
    return MarginalMap(m.dims, np.clip(out, 0.0, 1.0).ravel())


def make_synthetic(cfg: SynthConfig) -> MarginalMap:
    m = gaussian_blur(make_ball(cfg.dims, cfg.radius), cfg.rho)
    return random_deformation(m, cfg.deform_amplitude, cfg.deform_correlation, Rng(cfg.seed))
