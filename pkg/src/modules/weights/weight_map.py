# src/modules/weights/weight_map.py

import logging
import time
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.ndimage import maximum_filter1d
from tqdm import tqdm

from src.core.errors import DataError, DimensionError
from src.modules.geometry.sphere import pixel_grid_lonlat
from src.modules.geometry.viewport import DEFAULT_HALF_FOV, contains_mask
from src.utils import format_duration
from .gmm import DEFAULT_GMM, GmmParams, axis_mixture

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-9


class WeightMap(BaseModel):
    """Per-pixel weights over an equirectangular grid, stored as (rows, columns)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    width: int = Field(..., ge=2)
    height: int = Field(..., ge=2)
    weights: np.ndarray
    normalized: bool = True
    source_id: Optional[str] = None

    @model_validator(mode="after")
    def _check_weights(self) -> "WeightMap":
        if self.weights.shape != (self.height, self.width):
            raise ValueError(f"Weight grid shape {self.weights.shape} != {(self.height, self.width)}")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValueError("Weights must be finite and nonnegative")
        if self.normalized and abs(float(self.weights.sum()) - 1.0) > NORMALIZATION_TOLERANCE:
            raise ValueError(f"Normalized weights sum to {self.weights.sum()!r}, not 1")
        return self

    @classmethod
    def uniform(cls, width: int, height: int) -> "WeightMap":
        return cls(
            width=width,
            height=height,
            weights=np.full((height, width), 1.0 / (width * height)),
            source_id="uniform",
        )

    @classmethod
    def normalize(cls, grid: np.ndarray, source_id: Optional[str] = None) -> "WeightMap":
        total = float(grid.sum())
        if not np.isfinite(total) or total <= 0:
            raise DataError("Cannot normalize a weight grid whose sum is zero")
        height, width = grid.shape
        return cls(width=width, height=height, weights=grid / total, source_id=source_id)


def direction_probability_map(width: int, height: int, p: GmmParams = DEFAULT_GMM) -> np.ndarray:
    """v(s, t): GMM density at every pixel direction, as an (H, W) grid."""
    lon, lat = pixel_grid_lonlat(width, height)
    return axis_mixture(lat, p.latitude_terms)[:, None] * axis_mixture(lon, p.longitude_terms)[None, :]


# --- Viewport max pooling ---


def _circular_runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """(first offset, length) of every circular run of True values."""
    period = mask.size
    if mask.all():
        return [(0, period)]
    if not mask.any():
        return []
    shift = int(np.argmin(mask))
    padded = np.concatenate(([0], np.roll(mask, -shift).astype(np.int8), [0]))
    edges = np.diff(padded)
    begins = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return [((int(b) + shift) % period, int(e - b)) for b, e in zip(begins, ends)]


def _dilate_row(values: np.ndarray, runs: List[Tuple[int, int]]) -> np.ndarray:
    """out[j] = max over offsets k in any run of values[(j - k) mod P]."""
    period = values.size
    out = np.full(period, -np.inf)
    for first, length in runs:
        if length >= period:
            return np.full(period, values.max())
        last = first + length - 1
        window = maximum_filter1d(values, size=length, mode="wrap")
        out = np.maximum(out, np.roll(window, last - length // 2))
    return out


def pool_viewport_max(
    v: np.ndarray, half_fov: float = DEFAULT_HALF_FOV, show_progress: bool = False
) -> np.ndarray:
    """
    w(s, t) = max of v over every grid direction whose viewport contains (s, t).
    Columns 1 and W are the same meridian, so the grid has W-1 distinct longitudes.
    """
    height, width = v.shape
    period = width - 1
    lon, lat = pixel_grid_lonlat(width, height)
    # Longitude of the target minus longitude of the center, per column offset.
    offsets = lon[:period] - lon[0]

    pooled = np.zeros((height, period))
    for tc in tqdm(range(height), desc="Pooling", disable=not show_progress, leave=False):
        meridians = v[tc, :period].copy()
        meridians[0] = max(meridians[0], v[tc, period])
        inside = contains_mask(0.0, lat[tc], offsets[None, :], lat[:, None], half_fov)
        for t in np.flatnonzero(inside.any(axis=1)):
            runs = _circular_runs(inside[t])
            pooled[t] = np.maximum(pooled[t], _dilate_row(meridians, runs))
    return np.concatenate((pooled, pooled[:, :1]), axis=1)


def _resample_axis(grid: np.ndarray, size: int, axis: int) -> np.ndarray:
    """Linear resampling of an ERP axis whose first and last samples are the edges."""
    n = grid.shape[axis]
    coords = np.arange(size, dtype=np.float64) * (n - 1) / (size - 1)
    lower = np.minimum(np.floor(coords).astype(np.intp), n - 2)
    frac = coords - lower
    a = np.take(grid, lower, axis=axis)
    b = np.take(grid, lower + 1, axis=axis)
    shape = [1, 1]
    shape[axis] = size
    frac = frac.reshape(shape)
    return a * (1.0 - frac) + b * frac


def resample_grid(grid: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resampling of an (H, W) ERP grid to (height, width), edges kept on the edges."""
    return _resample_axis(_resample_axis(grid, height, axis=0), width, axis=1)


def pool_grid_shape(step_deg: float) -> Tuple[int, int]:
    return int(round(360.0 / step_deg)) + 1, int(round(180.0 / step_deg)) + 1


def pools_own_pixels(width: int, height: int, step_deg: float = 1.0) -> bool:
    """
    True when the grid is at least twice as coarse as the step_deg pooling
    grid on both axes. Finer grids all derive from the one step_deg grid, so
    maps of different sizes agree up to interpolation.
    """
    return (width - 1) * 2.0 * step_deg <= 360.0 and (height - 1) * 2.0 * step_deg <= 180.0


def ncp_source_id(p: GmmParams = DEFAULT_GMM, step_deg: float = 1.0, half_fov: float = DEFAULT_HALF_FOV) -> str:
    return f"ncp:{p.param_id}:{step_deg!r}:{half_fov!r}"


def ncp_weight_map(
    width: int,
    height: int,
    p: GmmParams = DEFAULT_GMM,
    step_deg: float = 1.0,
    half_fov: float = DEFAULT_HALF_FOV,
    show_progress: bool = False,
) -> WeightMap:
    """
    Non-content-based weight map. Coarse grids are pooled over their own
    pixel directions; the rest are pooled on the step_deg grid and resampled.
    """
    start = time.monotonic()
    pool_w, pool_h = pool_grid_shape(step_deg)
    if pools_own_pixels(width, height, step_deg):
        pooled = pool_viewport_max(direction_probability_map(width, height, p), half_fov, show_progress)
    else:
        coarse = pool_viewport_max(direction_probability_map(pool_w, pool_h, p), half_fov, show_progress)
        pooled = resample_grid(coarse, width, height)

    wmap = WeightMap.normalize(pooled, source_id=ncp_source_id(p, step_deg, half_fov))
    logger.info(f"Built {width}x{height} NCP weight map in {format_duration(time.monotonic() - start)}")
    return wmap


def cp_weight_map(ncp: WeightMap, mask: np.ndarray) -> WeightMap:
    """NCP weights restricted to a viewport binary map and renormalized."""
    if mask.shape != ncp.weights.shape:
        raise DimensionError(ncp.weights.shape, mask.shape)
    if ncp.normalized and mask.all():
        return ncp
    product = np.where(mask, ncp.weights, 0.0)
    if not product.any():
        raise DataError("Viewport mask selects only zero weights; CP weight map is undefined")
    return WeightMap.normalize(product, source_id=ncp.source_id)
