# src/modules/geometry/viewport.py

import logging
from functools import lru_cache

import numpy as np
from scipy import ndimage

from src.core.errors import ArgumentError
from src.modules.media.models import Frame
from .models import SphereDirection, ViewportImage
from .sphere import (
    from_local,
    lonlat_to_pixel,
    pixel_grid_lonlat,
    to_local,
    to_local_lonlat,
)

logger = logging.getLogger(__name__)

DEFAULT_HALF_FOV = 30.0
# Directions on the viewport border within this many degrees count as inside.
CONTAINMENT_TOLERANCE = 1e-9
# Rows per chunk when classifying full-resolution grids.
_ROW_CHUNK = 256


def viewport_contains(
    center: SphereDirection, d: SphereDirection, half_fov: float = DEFAULT_HALF_FOV
) -> bool:
    lon, lat = to_local(center, d.longitude, d.latitude)
    limit = half_fov + CONTAINMENT_TOLERANCE
    return bool(abs(lon) <= limit and abs(lat) <= limit)


def contains_mask(center_lon: float, center_lat: float, lon, lat, half_fov: float) -> np.ndarray:
    local_lon, local_lat = to_local_lonlat(center_lon, center_lat, lon, lat)
    limit = half_fov + CONTAINMENT_TOLERANCE
    return (np.abs(local_lon) <= limit) & (np.abs(local_lat) <= limit)


def viewport_binary_map(
    center: SphereDirection, width: int, height: int, half_fov: float = DEFAULT_HALF_FOV
) -> np.ndarray:
    """
    HxW boolean grid marking pixels inside the viewport centered at `center`.
    The pixel nearest the center is always marked, so the map is never empty.
    """
    lon, lat = pixel_grid_lonlat(width, height)
    mask = np.empty((height, width), dtype=bool)
    for start in range(0, height, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, height)
        mask[start:stop] = contains_mask(
            center.longitude, center.latitude, lon[None, :], lat[start:stop, None], half_fov
        )

    s, t = lonlat_to_pixel(center.longitude, center.latitude, width, height)
    row = int(np.clip(np.rint(t) - 1, 0, height - 1))
    col = int(np.clip(np.rint(s) - 1, 0, width - 1))
    mask[row, col] = True
    return mask


# --- Rectilinear viewport plane ---


@lru_cache(maxsize=4)
def _local_rays(size: int, half_fov: float) -> np.ndarray:
    """Local (unnormalized) ray per viewport pixel; x forward, y left, z up."""
    extent = np.tan(np.radians(half_fov))
    coords = ((np.arange(size, dtype=np.float64) + 0.5) / size * 2.0 - 1.0) * extent
    right, down = np.meshgrid(coords, coords)
    rays = np.stack((np.ones_like(right), -right, -down), axis=-1)
    rays.setflags(write=False)
    return rays


def viewport_point_to_direction(
    center: SphereDirection, x: float, y: float, size: int, half_fov: float = DEFAULT_HALF_FOV
) -> SphereDirection:
    """Maps a continuous viewport position (pixel units, origin top-left) to the sphere."""
    extent = np.tan(np.radians(half_fov))
    right = (x / size * 2.0 - 1.0) * extent
    down = (y / size * 2.0 - 1.0) * extent
    lon, lat = from_local(center, np.array([1.0, -right, -down]))
    return SphereDirection(
        longitude=float(np.clip(lon, -180.0, 180.0)),
        latitude=float(np.clip(lat, -90.0, 90.0)),
    )


def _sample_plane(plane: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    sampled = ndimage.map_coordinates(
        plane.astype(np.float64), [rows, cols], order=1, mode="nearest"
    )
    return np.clip(np.rint(sampled), 0, 255).astype(np.uint8)


def render_viewport(
    frame: Frame, center: SphereDirection, size: int = 512, half_fov: float = DEFAULT_HALF_FOV
) -> ViewportImage:
    """
    Gnomonic projection of the +/-half_fov field around `center`, bilinearly
    sampled from the equirectangular planes. Column coordinates never leave
    [0, W-1] because both image edges are the same meridian.
    """
    if size < 64:
        raise ArgumentError(f"Viewport size must be at least 64, got {size}")

    lon, lat = from_local(center, _local_rays(size, half_fov))
    s, t = lonlat_to_pixel(lon, lat, frame.width, frame.height)
    cols, rows = s - 1.0, t - 1.0

    luma = _sample_plane(frame.luma, rows, cols)
    # 4:2:0 chroma samples sit at the center of each 2x2 luma block.
    c_rows, c_cols = (rows + 0.5) / 2.0 - 0.5, (cols + 0.5) / 2.0 - 0.5
    chroma_u = _sample_plane(frame.chroma_u, c_rows, c_cols)
    chroma_v = _sample_plane(frame.chroma_v, c_rows, c_cols)

    return ViewportImage(
        size=size,
        center=center,
        half_fov=half_fov,
        luma=luma,
        chroma_u=chroma_u,
        chroma_v=chroma_v,
    )
