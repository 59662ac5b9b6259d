# src/modules/quality/metrics.py

import logging
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import ndimage

from src.core.errors import ArgumentError, DimensionError
from src.modules.geometry.models import SphereDirection
from src.modules.geometry.viewport import DEFAULT_HALF_FOV, viewport_binary_map
from src.modules.media.models import Frame
from src.modules.weights.weight_map import WeightMap, cp_weight_map

logger = logging.getLogger(__name__)

PEAK = 255.0
PSNR_CAP_DB = 100.0
ZERO_MSE = 1e-10

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * PEAK) ** 2
SSIM_C2 = (0.03 * PEAK) ** 2

LumaLike = Union[Frame, np.ndarray]


class FrameScore(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    frame_index: int
    value: float


def _luma(x: LumaLike) -> np.ndarray:
    return (x.luma if isinstance(x, Frame) else np.asarray(x)).astype(np.float64)


def _pair(ref: LumaLike, dist: LumaLike, w: WeightMap = None):
    a, b = _luma(ref), _luma(dist)
    if a.shape != b.shape:
        raise DimensionError(a.shape, b.shape)
    if w is not None and w.weights.shape != a.shape:
        raise DimensionError(a.shape, w.weights.shape)
    return a, b


def psnr_from_mse(mse: float, cap: float = PSNR_CAP_DB) -> float:
    if mse < ZERO_MSE:
        return cap
    return float(min(10.0 * np.log10(PEAK**2 / mse), cap))


def weighted_mse(ref: LumaLike, dist: LumaLike, w: WeightMap) -> float:
    """Sum of squared luma errors times the weights; no pixel-count division."""
    a, b = _pair(ref, dist, w)
    return float(np.sum((a - b) ** 2 * w.weights))


def psnr(ref: LumaLike, dist: LumaLike, cap: float = PSNR_CAP_DB) -> float:
    a, b = _pair(ref, dist)
    return psnr_from_mse(float(np.mean((a - b) ** 2)), cap)


def ncp_psnr(ref: LumaLike, dist: LumaLike, w: WeightMap, cap: float = PSNR_CAP_DB) -> float:
    return psnr_from_mse(weighted_mse(ref, dist, w), cap)


def cp_psnr(
    ref: LumaLike,
    dist: LumaLike,
    ncp: WeightMap,
    direction: SphereDirection,
    half_fov: float = DEFAULT_HALF_FOV,
    cap: float = PSNR_CAP_DB,
) -> float:
    mask = viewport_binary_map(direction, ncp.width, ncp.height, half_fov)
    return ncp_psnr(ref, dist, cp_weight_map(ncp, mask), cap)


def ssim_map(ref: LumaLike, dist: LumaLike) -> np.ndarray:
    """
    Local SSIM with an 11x11 Gaussian window (sigma 1.5), computed at every
    pixel with symmetric padding so the map has the frame's shape.
    """
    a, b = _pair(ref, dist)
    if min(a.shape) < SSIM_WINDOW:
        raise ArgumentError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {a.shape}")

    def blur(x: np.ndarray) -> np.ndarray:
        radius = SSIM_WINDOW // 2
        return ndimage.gaussian_filter(x, SSIM_SIGMA, mode="reflect", truncate=radius / SSIM_SIGMA)

    mu_a, mu_b = blur(a), blur(b)
    mu_aa, mu_bb, mu_ab = mu_a * mu_a, mu_b * mu_b, mu_a * mu_b
    var_a = blur(a * a) - mu_aa
    var_b = blur(b * b) - mu_bb
    cov = blur(a * b) - mu_ab

    num = (2.0 * mu_ab + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_aa + mu_bb + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return np.clip(num / den, -1.0, 1.0)


def mean_ssim(ref: LumaLike, dist: LumaLike) -> float:
    return float(ssim_map(ref, dist).mean())


def weighted_ssim(ref: LumaLike, dist: LumaLike, w: WeightMap) -> float:
    """NCP-SSIM with an NCP map, CP-SSIM with a CP map."""
    a, b = _pair(ref, dist, w)
    return float(np.sum(ssim_map(a, b) * w.weights))


def cp_ssim(
    ref: LumaLike, dist: LumaLike, ncp: WeightMap, direction: SphereDirection, half_fov: float = DEFAULT_HALF_FOV
) -> float:
    mask = viewport_binary_map(direction, ncp.width, ncp.height, half_fov)
    return weighted_ssim(ref, dist, cp_weight_map(ncp, mask))
