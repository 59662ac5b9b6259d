# src/modules/gaze/candidates.py

import logging
import zlib
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from sklearn.neighbors import NearestNeighbors

from src.core.errors import ArgumentError
from src.modules.geometry.models import SphereDirection, ViewportImage
from src.modules.geometry.viewport import render_viewport, viewport_point_to_direction
from src.modules.media.models import Frame
from src.modules.saliency.pqft import SaliencyMap, pqft_saliency
from .models import Candidate, ExtractorConfig, FeatureVector

logger = logging.getLogger(__name__)

CONTRAST_PATCH = 32
# Kernel support in bandwidths; the Gaussian is negligible beyond it.
KERNEL_REACH = 3.0


def derive_seed(seed: int, *keys) -> int:
    """Independent, reproducible seed for one unit of work (sequence, subject, frame)."""
    entropy = [seed] + [zlib.crc32(str(k).encode("utf-8")) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def sample_points(s: SaliencyMap, n: int, seed: int) -> np.ndarray:
    """n i.i.d. pixel-center positions (x, y) drawn from the saliency distribution."""
    if n < 1:
        raise ArgumentError(f"Point count must be positive, got {n}")
    cdf = np.cumsum(s.values.ravel())
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    flat = np.searchsorted(cdf, rng.random(n), side="right")
    flat = np.minimum(flat, cdf.size - 1)
    rows, cols = np.divmod(flat, s.size)
    return np.column_stack((cols + 0.5, rows + 0.5))


class Cluster(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mode: tuple[float, float]
    members: np.ndarray

    def std(self, points: np.ndarray) -> float:
        """Isotropic standard deviation of the member points."""
        pts = points[self.members]
        return float(np.sqrt(((pts - pts.mean(axis=0)) ** 2).sum(axis=1).mean() / 2.0))


def mean_shift(points: np.ndarray, bandwidth: float, max_iter: int = 300, tol: float = 1e-3) -> List[Cluster]:
    """
    Gaussian-kernel mean shift. Points sharing a cell of bandwidth/4 climb
    together from their weighted centroid; modes closer than bandwidth/2 are
    merged, stronger modes first. Clusters come back strongest first.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if points.shape[0] == 0:
        raise ArgumentError("Mean shift needs at least one point")
    if bandwidth <= 0:
        raise ArgumentError(f"Bandwidth must be positive, got {bandwidth}")

    unique, inverse, counts = np.unique(points, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    cells = np.floor(unique / (bandwidth / 4.0)).astype(np.int64)
    _, seed_of_unique = np.unique(cells, axis=0, return_inverse=True)
    seed_of_unique = seed_of_unique.reshape(-1)
    mass = np.bincount(seed_of_unique, weights=counts)
    modes = np.column_stack(
        [np.bincount(seed_of_unique, weights=counts * unique[:, d]) / mass for d in (0, 1)]
    )

    nn = NearestNeighbors(radius=KERNEL_REACH * bandwidth).fit(unique)
    active = np.ones(len(modes), dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if not idx.size:
            break
        distances, neighbours = nn.radius_neighbors(modes[idx], return_distance=True)
        for k, dist, members in zip(idx, distances, neighbours):
            w = counts[members] * np.exp(-0.5 * (dist / bandwidth) ** 2)
            if not members.size or w.sum() <= 0:
                active[k] = False
                continue
            shifted = w @ unique[members] / w.sum()
            if np.hypot(*(shifted - modes[k])) < tol * bandwidth:
                active[k] = False
            modes[k] = shifted

    support = np.array(
        [counts[m].sum() for m in nn.radius_neighbors(modes, radius=bandwidth, return_distance=False)]
    )
    order = np.lexsort((modes[:, 1], modes[:, 0], -support))
    kept: List[int] = []
    label_of_seed = np.empty(len(modes), dtype=np.intp)
    for k in order:
        for label, j in enumerate(kept):
            if np.hypot(*(modes[k] - modes[j])) < bandwidth / 2.0:
                label_of_seed[k] = label
                break
        else:
            label_of_seed[k] = len(kept)
            kept.append(int(k))

    point_labels = label_of_seed[seed_of_unique[inverse]]
    return [
        Cluster(mode=(float(modes[j, 0]), float(modes[j, 1])), members=np.flatnonzero(point_labels == label))
        for label, j in enumerate(kept)
    ]


def extract_features(c: Candidate, saliency: SaliencyMap, luma: np.ndarray) -> FeatureVector:
    size = saliency.size
    x, y = c.viewport_point
    dx, dy = x - size / 2.0, y - size / 2.0
    dist = float(np.hypot(dx, dy))
    angle = float(np.degrees(np.arctan2(dy, dx))) if dist > 0 else 0.0

    centers = np.arange(size) + 0.5
    r0, r1 = np.searchsorted(centers, [y - c.spread, y + c.spread], side="left")
    c0, c1 = np.searchsorted(centers, [x - c.spread, x + c.spread], side="left")
    rows, cols = np.meshgrid(centers[r0 : r1 + 1], centers[c0 : c1 + 1], indexing="ij")
    disc = np.hypot(cols - x, rows - y) <= c.spread
    window = saliency.values[r0 : r1 + 1, c0 : c1 + 1]
    if disc.any():
        mean_saliency = float(window[disc].mean())
    else:
        row = int(np.clip(np.floor(y), 0, size - 1))
        col = int(np.clip(np.floor(x), 0, size - 1))
        mean_saliency = float(saliency.values[row, col])

    half = CONTRAST_PATCH // 2
    top = int(np.clip(np.floor(y) - half, 0, max(size - CONTRAST_PATCH, 0)))
    left = int(np.clip(np.floor(x) - half, 0, max(size - CONTRAST_PATCH, 0)))
    patch = luma[top : top + CONTRAST_PATCH, left : left + CONTRAST_PATCH].astype(np.float64)

    return FeatureVector(
        dist=dist / size,
        angle=angle,
        spread=c.spread / size,
        mean_saliency=mean_saliency,
        local_contrast=float(patch.std()) / 255.0,
    )


def candidates_from_saliency(
    view: ViewportImage, saliency: SaliencyMap, seed: int, config: ExtractorConfig
) -> List[Candidate]:
    """
    One candidate per mean-shift cluster, placed at the cluster's converged
    mode. Clusters holding less than min_cluster_fraction of the points, or
    less than min_relative_support of the strongest cluster, are dropped.
    """
    size = view.size
    if saliency.is_uniform:
        center = Candidate(
            direction=view.center,
            viewport_point=(size / 2.0, size / 2.0),
            spread=size / np.sqrt(12.0),
        )
        return [center.model_copy(update={"features": extract_features(center, saliency, view.luma)})]

    points = sample_points(saliency, config.points, seed)
    clusters = mean_shift(points, config.bandwidth_frac * size)
    shares = np.array([c.members.size / len(points) for c in clusters])
    floor = max(config.min_cluster_fraction, config.min_relative_support * shares.max())
    chosen = [(c, share) for c, share in zip(clusters, shares) if share >= floor]
    if not chosen:
        strongest = int(np.argmax(shares))
        chosen = [(clusters[strongest], shares[strongest])]
    if len(chosen) < len(clusters):
        logger.debug(f"Dropped {len(clusters) - len(chosen)} weak clusters below {floor:.1%} support")

    candidates = []
    for cluster, share in chosen:
        x, y = cluster.mode
        candidate = Candidate(
            direction=viewport_point_to_direction(view.center, x, y, size, view.half_fov),
            viewport_point=(x, y),
            spread=max(cluster.std(points), 0.5),
            support=float(share),
        )
        candidates.append(
            candidate.model_copy(update={"features": extract_features(candidate, saliency, view.luma)})
        )
    return candidates


def extract_candidates(
    frame: Frame,
    prev: Optional[Frame],
    current: SphereDirection,
    seed: int,
    config: Optional[ExtractorConfig] = None,
) -> List[Candidate]:
    """Candidate next viewing directions from the viewport seen at `current`."""
    config = config or ExtractorConfig()
    view = render_viewport(frame, current, config.viewport_size, config.half_fov)
    prev_view = (
        render_viewport(prev, current, config.viewport_size, config.half_fov) if prev is not None else None
    )
    saliency = pqft_saliency(view, prev_view, config.saliency_sigma_frac)
    candidates = candidates_from_saliency(view, saliency, seed, config)
    logger.debug(f"{len(candidates)} candidates around {current.as_tuple()}")
    return candidates
