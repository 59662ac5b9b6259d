# src/modules/subjective/analysis.py

import logging
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage

from src.core.errors import ArgumentError, DataError, DimensionError
from src.modules.evaluation.stats import srcc
from src.modules.geometry.sphere import lonlat_to_pixel
from src.modules.media.models import TraceSet
from .scores import o_dmos

logger = logging.getLogger(__name__)


class HeatMap(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    width: int = Field(..., ge=2)
    height: int = Field(..., ge=2)
    density: np.ndarray

    @model_validator(mode="after")
    def _check_density(self) -> "HeatMap":
        if self.density.shape != (self.height, self.width):
            raise ValueError(f"Density shape {self.density.shape} != {(self.height, self.width)}")
        if not np.all(np.isfinite(self.density)) or np.any(self.density < 0):
            raise ValueError("Heat map density must be finite and nonnegative")
        return self


def _pooled_angles(traces: TraceSet, sequence_id: Optional[str] = None) -> Tuple[np.ndarray, np.ndarray]:
    records = [r for r in traces.records if sequence_id is None or r.sequence_id == sequence_id]
    lon = np.array([r.direction.longitude for r in records], dtype=np.float64)
    lat = np.array([r.direction.latitude for r in records], dtype=np.float64)
    return lon, lat


def lonlat_correlation(traces: TraceSet) -> float:
    """Pearson correlation between the longitudes and latitudes of all samples."""
    lon, lat = _pooled_angles(traces)
    if lon.size < 2:
        raise DataError("Correlation needs at least 2 samples")
    if np.var(lon) == 0 or np.var(lat) == 0:
        raise DataError("Longitude or latitude has zero variance; correlation is undefined")
    dlon, dlat = lon - lon.mean(), lat - lat.mean()
    return float(np.sum(dlon * dlat) / np.sqrt(np.sum(dlon**2) * np.sum(dlat**2)))


def heatmap_from_traces(
    traces: TraceSet, width: int, height: int, sigma_deg: float = 10.0, sequence_id: Optional[str] = None
) -> HeatMap:
    """
    Unit impulses at the pixel nearest each sample, blurred by a Gaussian of
    sigma_deg. Longitude wraps around; latitude reflects at the poles, so mass is kept.
    """
    lon, lat = _pooled_angles(traces, sequence_id)
    if lon.size == 0:
        raise DataError("Heat map needs at least one trace sample")
    s, t = lonlat_to_pixel(lon, lat, width, height)
    cols = np.clip(np.rint(s).astype(np.intp) - 1, 0, width - 1)
    rows = np.clip(np.rint(t).astype(np.intp) - 1, 0, height - 1)
    impulses = np.zeros((height, width))
    np.add.at(impulses, (rows, cols), 1.0)

    sigma_px = (sigma_deg * (height - 1) / 180.0, sigma_deg * (width - 1) / 360.0)
    density = ndimage.gaussian_filter(impulses, sigma=sigma_px, mode=("reflect", "wrap"))
    return HeatMap(width=width, height=height, density=np.maximum(density, 0.0))


def heatmap_cc(a: HeatMap, b: HeatMap) -> float:
    """Linear correlation coefficient over pixels (Pearson convention)."""
    if a.density.shape != b.density.shape:
        raise DimensionError(a.density.shape, b.density.shape)
    da = a.density - a.density.mean()
    db = b.density - b.density.mean()
    norm = np.sqrt(np.sum(da**2) * np.sum(db**2))
    if norm == 0:
        raise DataError("Heat map is constant; CC is undefined")
    return float(np.sum(da * db) / norm)


def direction_histograms(traces: TraceSet, bin_deg: float = 1.0) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Normalized frequency of longitudes and of latitudes, one row per bin (bin center)."""
    if bin_deg <= 0:
        raise ArgumentError(f"Bin width must be positive, got {bin_deg}")
    lon, lat = _pooled_angles(traces)
    if lon.size == 0:
        raise DataError("Histogram needs at least one trace sample")

    def histogram(values: np.ndarray, bound: float, name: str) -> pd.DataFrame:
        edges = np.arange(-bound, bound + bin_deg / 2.0, bin_deg)
        if edges[-1] < bound:
            edges = np.append(edges, bound)
        counts, edges = np.histogram(values, bins=edges)
        return pd.DataFrame({name: (edges[:-1] + edges[1:]) / 2.0, "frequency": counts / values.size})

    return histogram(lon, 180.0, "longitude_deg"), histogram(lat, 90.0, "latitude_deg")


def _random_halves(items, rng: np.random.Generator):
    order = rng.permutation(len(items))
    half = len(items) // 2
    return [items[i] for i in order[:half]], [items[i] for i in order[half : 2 * half]]


def split_half_heatmap_cc(
    traces: TraceSet,
    width: int,
    height: int,
    sigma_deg: float = 10.0,
    trials: int = 10,
    seed: int = 2018,
    sequence_id: Optional[str] = None,
) -> Tuple[float, float]:
    """Mean and std of the CC between heat maps of two random, disjoint halves of the subjects."""
    subjects = traces.subjects
    if len(subjects) < 2:
        raise DataError("Split-half consistency needs at least 2 subjects")
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(trials):
        first, second = _random_halves(subjects, rng)
        a = heatmap_from_traces(traces.subset(first), width, height, sigma_deg, sequence_id)
        b = heatmap_from_traces(traces.subset(second), width, height, sigma_deg, sequence_id)
        values.append(heatmap_cc(a, b))
    logger.info(f"Split-half heat-map CC over {trials} trials: {np.mean(values):.4f}")
    return float(np.mean(values)), float(np.std(values))


def split_half_dmos_srcc(rescaled: pd.DataFrame, trials: int = 10, seed: int = 2018) -> float:
    """Mean SRCC between O-DMOS computed from two random, disjoint halves of the subjects."""
    subjects = list(rescaled.index)
    if len(subjects) < 2:
        raise DataError("Split-half consistency needs at least 2 subjects")
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(trials):
        first, second = _random_halves(subjects, rng)
        a, b = rescaled.loc[first], rescaled.loc[second]
        shared = [seq for seq in rescaled.columns if a[seq].notna().any() and b[seq].notna().any()]
        if len(shared) < 2:
            raise DataError("Fewer than 2 sequences are rated by both halves")
        values.append(srcc(o_dmos(a[shared]).to_numpy(), o_dmos(b[shared]).to_numpy()))
    return float(np.mean(values))
