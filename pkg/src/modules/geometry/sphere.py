# src/modules/geometry/sphere.py

import logging
from functools import lru_cache

import numpy as np

from src.core.errors import ArgumentError
from .models import REGIONS, RegionId, SphereDirection

logger = logging.getLogger(__name__)


# --- Equirectangular pixel <-> direction ---
# Pixels are 1-based: s=1 is longitude +180, s=W is -180; t=1 is latitude +90.


def _check_grid(width: int, height: int) -> None:
    if width < 2 or height < 2:
        raise ArgumentError(f"Grid must be at least 2x2, got {width}x{height}")


def pixel_to_direction(s: float, t: float, width: int, height: int) -> SphereDirection:
    _check_grid(width, height)
    if not (1 <= s <= width and 1 <= t <= height):
        raise ArgumentError(f"Pixel ({s}, {t}) outside 1..{width} x 1..{height}")
    lon, lat = pixel_to_lonlat(np.float64(s), np.float64(t), width, height)
    return SphereDirection(
        longitude=float(np.clip(lon, -180.0, 180.0)),
        latitude=float(np.clip(lat, -90.0, 90.0)),
    )


def pixel_to_lonlat(s, t, width: int, height: int):
    """Vectorized form of pixel_to_direction; no range checks."""
    lon = -360.0 * ((s - 1.0) / (width - 1.0) - 0.5)
    lat = -180.0 * ((t - 1.0) / (height - 1.0) - 0.5)
    return lon, lat


def direction_to_pixel(d: SphereDirection, width: int, height: int) -> tuple[float, float]:
    _check_grid(width, height)
    s, t = lonlat_to_pixel(d.longitude, d.latitude, width, height)
    return float(s), float(t)


def lonlat_to_pixel(lon, lat, width: int, height: int):
    s = 1.0 + (width - 1.0) * (0.5 - np.asarray(lon, dtype=np.float64) / 360.0)
    t = 1.0 + (height - 1.0) * (0.5 - np.asarray(lat, dtype=np.float64) / 180.0)
    return s, t


@lru_cache(maxsize=8)
def pixel_grid_lonlat(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Longitude per column and latitude per row of a WxH grid (read-only)."""
    _check_grid(width, height)
    lon, _ = pixel_to_lonlat(np.arange(1, width + 1, dtype=np.float64), 1.0, width, height)
    _, lat = pixel_to_lonlat(1.0, np.arange(1, height + 1, dtype=np.float64), width, height)
    lon.setflags(write=False)
    lat.setflags(write=False)
    return lon, lat


# --- Unit vectors and rotations ---
# x points to the front (0, 0), y to the left (90, 0), z to the top.


def lonlat_to_vector(lon, lat) -> np.ndarray:
    phi = np.radians(lon)
    theta = np.radians(lat)
    cos_t = np.cos(theta)
    return np.stack(
        np.broadcast_arrays(cos_t * np.cos(phi), cos_t * np.sin(phi), np.sin(theta)),
        axis=-1,
    )


def vector_to_lonlat(v: np.ndarray):
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    lon = np.degrees(np.arctan2(y, x))
    lat = np.degrees(np.arctan2(z, np.hypot(x, y)))
    return lon, lat


def to_local(center: SphereDirection, lon, lat):
    """
    Rotates directions so that `center` lands on (0, 0) and returns their
    local longitude and latitude in degrees.
    """
    return to_local_lonlat(center.longitude, center.latitude, lon, lat)


def to_local_lonlat(center_lon: float, center_lat: float, lon, lat):
    v = lonlat_to_vector(lon, lat)
    phi_c = np.radians(center_lon)
    theta_c = np.radians(center_lat)
    cp, sp = np.cos(phi_c), np.sin(phi_c)
    ct, st = np.cos(theta_c), np.sin(theta_c)

    x1 = v[..., 0] * cp + v[..., 1] * sp
    y1 = -v[..., 0] * sp + v[..., 1] * cp
    z1 = v[..., 2]

    x2 = x1 * ct + z1 * st
    z2 = -x1 * st + z1 * ct
    local = np.stack((x2, y1, z2), axis=-1)
    return vector_to_lonlat(local)


def from_local(center: SphereDirection, local_vectors: np.ndarray):
    """Inverse of to_local for local unit (or unnormalized) vectors."""
    phi_c = np.radians(center.longitude)
    theta_c = np.radians(center.latitude)
    cp, sp = np.cos(phi_c), np.sin(phi_c)
    ct, st = np.cos(theta_c), np.sin(theta_c)
    x2, y2, z2 = local_vectors[..., 0], local_vectors[..., 1], local_vectors[..., 2]

    x1 = x2 * ct - z2 * st
    z1 = x2 * st + z2 * ct
    x = x1 * cp - y2 * sp
    y = x1 * sp + y2 * cp
    return vector_to_lonlat(np.stack((x, y, z1), axis=-1))


# --- Distances and regions ---


def angular_distance(a: SphereDirection, b: SphereDirection) -> float:
    return float(angular_distance_deg(a.longitude, a.latitude, b.longitude, b.latitude))


def angular_distance_deg(lon1, lat1, lon2, lat2):
    va = lonlat_to_vector(lon1, lat1)
    vb = lonlat_to_vector(lon2, lat2)
    cross = np.linalg.norm(np.cross(va, vb), axis=-1)
    dot = np.sum(va * vb, axis=-1)
    return np.degrees(np.arctan2(cross, dot))


def region_indices(lon, lat) -> np.ndarray:
    """Index into REGIONS of the cube face each direction falls on."""
    v = lonlat_to_vector(lon, lat)
    scores = np.stack(
        (v[..., 0], v[..., 1], -v[..., 0], -v[..., 1], v[..., 2], -v[..., 2]), axis=-1
    )
    return np.argmax(scores, axis=-1)


def region_of(d: SphereDirection) -> RegionId:
    return REGIONS[int(region_indices(d.longitude, d.latitude))]
