# src/modules/geometry/models.py

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class SphereDirection(BaseModel):
    """A viewing direction in degrees; +longitude is to the viewer's left."""

    model_config = ConfigDict(frozen=True)

    longitude: float = Field(..., ge=-180.0, le=180.0)
    latitude: float = Field(..., ge=-90.0, le=90.0)

    @classmethod
    def front(cls) -> "SphereDirection":
        return cls(longitude=0.0, latitude=0.0)

    def as_tuple(self) -> tuple[float, float]:
        return self.longitude, self.latitude


class RegionId(str, Enum):
    # Declaration order is the V-DMOS column order and the tie-break priority.
    FRONT = "front"
    LEFT = "left"
    BACK = "back"
    RIGHT = "right"
    TOP = "top"
    BOTTOM = "bottom"


REGIONS: tuple[RegionId, ...] = tuple(RegionId)


class ViewportImage(BaseModel):
    """A square rectilinear rendering of the field around `center`."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    size: int = Field(..., ge=64)
    center: SphereDirection
    half_fov: float = 30.0
    luma: np.ndarray
    chroma_u: np.ndarray
    chroma_v: np.ndarray

    @model_validator(mode="after")
    def _check_planes(self) -> "ViewportImage":
        for name in ("luma", "chroma_u", "chroma_v"):
            if getattr(self, name).shape != (self.size, self.size):
                raise ValueError(f"{name} plane must be {self.size}x{self.size}")
        return self
