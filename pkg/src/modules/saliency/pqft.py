# src/modules/saliency/pqft.py

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import fft, ndimage

from src.core.errors import DimensionError
from src.modules.geometry.models import ViewportImage

logger = logging.getLogger(__name__)

DEFAULT_SIGMA_FRAC = 0.02


class SaliencyMap(BaseModel):
    """A probability distribution over the pixels of a square viewport."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    size: int = Field(..., gt=0)
    values: np.ndarray

    @model_validator(mode="after")
    def _check_values(self) -> "SaliencyMap":
        if self.values.shape != (self.size, self.size):
            raise ValueError(f"Saliency grid must be {self.size}x{self.size}")
        if np.any(self.values < 0) or abs(float(self.values.sum()) - 1.0) > 1e-9:
            raise ValueError("Saliency must be nonnegative and sum to 1")
        return self

    @classmethod
    def uniform(cls, size: int) -> "SaliencyMap":
        return cls(size=size, values=np.full((size, size), 1.0 / (size * size)))

    @property
    def is_uniform(self) -> bool:
        return bool(np.ptp(self.values) <= 1e-12 * float(self.values.max()))


def _phase_only(spectrum_a: np.ndarray, spectrum_b: np.ndarray):
    """Scales the quaternion spectrum (a + b j) to unit magnitude at every frequency."""
    magnitude = np.sqrt(np.abs(spectrum_a) ** 2 + np.abs(spectrum_b) ** 2)
    safe = np.where(magnitude > 0, magnitude, 1.0)
    scale = np.where(magnitude > 0, 1.0 / safe, 0.0)
    return spectrum_a * scale, spectrum_b * scale


def pqft_saliency(
    current: ViewportImage, previous: Optional[ViewportImage] = None, sigma_frac: float = DEFAULT_SIGMA_FRAC
) -> SaliencyMap:
    """
    Phase-spectrum saliency of the quaternion image (motion, Y, U, V).
    The quaternion transform runs as two complex FFTs of the symplectic
    parts f1 = motion + Y i and f2 = U + V i.
    """
    if previous is not None and previous.size != current.size:
        raise DimensionError((current.size, current.size), (previous.size, previous.size))

    luma = current.luma.astype(np.float64)
    motion = (
        np.abs(luma - previous.luma.astype(np.float64)) if previous is not None else np.zeros_like(luma)
    )
    u = current.chroma_u.astype(np.float64)
    v = current.chroma_v.astype(np.float64)

    if all(np.ptp(ch) == 0 for ch in (motion, luma, u, v)):
        return SaliencyMap.uniform(current.size)

    f1 = fft.fft2(motion + 1j * luma)
    f2 = fft.fft2(u + 1j * v)
    f1, f2 = _phase_only(f1, f2)
    q1 = fft.ifft2(f1)
    q2 = fft.ifft2(f2)
    energy = np.abs(q1) ** 2 + np.abs(q2) ** 2

    smoothed = ndimage.gaussian_filter(energy, sigma=sigma_frac * current.size, mode="reflect")
    smoothed = np.maximum(smoothed, 0.0)
    total = float(smoothed.sum())
    if not np.isfinite(total) or total <= 0:
        return SaliencyMap.uniform(current.size)
    return SaliencyMap(size=current.size, values=smoothed / total)
