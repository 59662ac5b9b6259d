# src/modules/weights/gmm.py

import logging
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.modules.geometry.models import SphereDirection

logger = logging.getLogger(__name__)


class GaussianTerm(BaseModel):
    """One component a * exp(-((x - b) / c)^2)."""

    model_config = ConfigDict(frozen=True)

    a: float = Field(..., ge=0.0)
    b: float
    c: float

    @field_validator("c")
    @classmethod
    def _nonzero_width(cls, c: float) -> float:
        if c == 0:
            raise ValueError("Gaussian width c must be nonzero")
        return c


class GmmParams(BaseModel):
    """Separable 3+3 term model of how often each direction is viewed."""

    model_config = ConfigDict(frozen=True)

    longitude_terms: Tuple[GaussianTerm, GaussianTerm, GaussianTerm]
    latitude_terms: Tuple[GaussianTerm, GaussianTerm, GaussianTerm]

    @classmethod
    def from_rows(cls, longitude: list, latitude: list) -> "GmmParams":
        return cls(
            longitude_terms=tuple(GaussianTerm(a=a, b=b, c=c) for a, b, c in longitude),
            latitude_terms=tuple(GaussianTerm(a=a, b=b, c=c) for a, b, c in latitude),
        )

    @property
    def param_id(self) -> str:
        terms = self.longitude_terms + self.latitude_terms
        return "-".join(f"{t.a!r}:{t.b!r}:{t.c!r}" for t in terms)


# Least-squares fit over the viewing-direction database.
DEFAULT_GMM = GmmParams.from_rows(
    longitude=[(0.0034, -0.1549, 4.6740), (0.0106, 1.5140, 18.51), (0.0032, 6.3670, 110.5)],
    latitude=[(0.0075, -2.3738, 6.6437), (0.0209, 1.8260, 14.8171), (0.0057, 1.4618, 36.1311)],
)


def axis_mixture(x, terms) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    total = np.zeros_like(x)
    for term in terms:
        total = total + term.a * np.exp(-(((x - term.b) / term.c) ** 2))
    return total


def gmm_density(d: SphereDirection, p: GmmParams = DEFAULT_GMM) -> float:
    return float(axis_mixture(d.longitude, p.longitude_terms) * axis_mixture(d.latitude, p.latitude_terms))
