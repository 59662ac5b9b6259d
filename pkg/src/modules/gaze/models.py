# src/modules/gaze/models.py

from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from src.modules.geometry.models import SphereDirection
from src.utils import short_digest

FEATURE_NAMES = ("dist", "angle", "spread", "mean_saliency", "local_contrast")
FEATURE_COUNT = len(FEATURE_NAMES)
MODEL_VERSION = 1
LEAF = -1


class FeatureVector(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    dist: float = Field(..., ge=0.0)
    angle: float = Field(..., ge=-180.0, le=180.0)
    spread: float = Field(..., ge=0.0)
    mean_saliency: float = Field(..., ge=0.0)
    local_contrast: float = Field(..., ge=0.0)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)


class Candidate(BaseModel):
    """Center of one salient cluster, proposed as the next viewing direction."""

    model_config = ConfigDict(frozen=True)

    direction: SphereDirection
    viewport_point: Tuple[float, float]
    spread: float = Field(..., gt=0.0)
    support: float = Field(default=1.0, ge=0.0, le=1.0)
    features: Optional[FeatureVector] = None


class DecisionTreeModel(BaseModel):
    """
    A binary tree in flat arrays. Node 0 is the root; a node with
    feature_index == -1 is a leaf. Samples go left when x <= threshold.
    """

    model_config = ConfigDict(frozen=True)

    feature_index: List[int]
    threshold: List[float]
    left: List[int]
    right: List[int]
    leaf_posterior: List[float]

    @model_validator(mode="after")
    def _check_nodes(self) -> "DecisionTreeModel":
        n = len(self.feature_index)
        if n == 0:
            raise ValueError("A tree needs at least one node")
        if not all(len(x) == n for x in (self.threshold, self.left, self.right, self.leaf_posterior)):
            raise ValueError("Tree node arrays have different lengths")
        for i, (f, lft, rgt, post) in enumerate(
            zip(self.feature_index, self.left, self.right, self.leaf_posterior)
        ):
            if not 0.0 <= post <= 1.0:
                raise ValueError(f"Node {i}: posterior {post} outside [0, 1]")
            if f == LEAF:
                continue
            if not 0 <= f < FEATURE_COUNT:
                raise ValueError(f"Node {i}: feature index {f} outside [0, {FEATURE_COUNT})")
            if not (i < lft < n and i < rgt < n):
                raise ValueError(f"Node {i}: child indices ({lft}, {rgt}) are invalid")
        return self

    @property
    def depth(self) -> int:
        depths = [0] * len(self.feature_index)
        for i, f in enumerate(self.feature_index):
            if f != LEAF:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return max(depths)

    def posterior(self, features: np.ndarray) -> np.ndarray:
        """Leaf posterior reached by each row of an (n, 5) feature array."""
        # Trees are grown on float32 features; compare the same way.
        x = np.asarray(features, dtype=np.float32).astype(np.float64)
        nodes = np.zeros(x.shape[0], dtype=np.intp)
        feature = np.asarray(self.feature_index)
        threshold = np.asarray(self.threshold)
        left, right = np.asarray(self.left), np.asarray(self.right)
        active = feature[nodes] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            current = nodes[idx]
            goes_left = x[idx, feature[current]] <= threshold[current]
            nodes[idx] = np.where(goes_left, left[current], right[current])
            active = feature[nodes] != LEAF
        return np.asarray(self.leaf_posterior)[nodes]


class ForestHyperParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    trees: int = Field(default=100, ge=1)
    max_depth: int = Field(default=12, ge=1)
    min_leaf: int = Field(default=5, ge=1)
    features_per_split: int = Field(default=2, ge=1, le=FEATURE_COUNT)
    seed: int = 2018


class ForestModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    version: int = MODEL_VERSION
    tree_count: int = Field(..., ge=1)
    trees: List[DecisionTreeModel]
    metadata: Dict[str, Any] = Field(default_factory=dict)

    _model_id: str = PrivateAttr(default="")

    @model_validator(mode="after")
    def _check_trees(self) -> "ForestModel":
        if self.version != MODEL_VERSION:
            raise ValueError(f"Unsupported model version {self.version}, expected {MODEL_VERSION}")
        if len(self.trees) != self.tree_count:
            raise ValueError(f"tree_count={self.tree_count} but {len(self.trees)} trees are stored")
        return self

    @property
    def model_id(self) -> str:
        if not self._model_id:
            self._model_id = short_digest(self.model_dump_json())
        return self._model_id

    def posteriors(self, features: np.ndarray) -> np.ndarray:
        """Averaged positive-class posterior for each row of an (n, 5) array."""
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        total = np.zeros(features.shape[0])
        for tree in self.trees:
            total += tree.posterior(features)
        return total / self.tree_count


class Trajectory(BaseModel):
    """One simulated viewing direction per frame, starting at the front center."""

    model_config = ConfigDict(frozen=True)

    sequence_id: Optional[str] = None
    directions: List[SphereDirection]

    @model_validator(mode="after")
    def _check_start(self) -> "Trajectory":
        if not self.directions:
            raise ValueError("A trajectory covers at least one frame")
        if self.directions[0] != SphereDirection.front():
            raise ValueError("A trajectory starts at (0, 0)")
        return self

    def __len__(self) -> int:
        return len(self.directions)


class ExtractorConfig(BaseModel):
    """Knobs of the candidate extractor; see Settings for the defaults' origin."""

    model_config = ConfigDict(frozen=True)

    viewport_size: int = Field(default=512, ge=64)
    half_fov: float = Field(default=30.0, gt=0.0, lt=90.0)
    points: int = Field(default=10_000, ge=1)
    bandwidth_frac: float = Field(default=0.10, gt=0.0)
    saliency_sigma_frac: float = Field(default=0.02, gt=0.0)
    min_cluster_fraction: float = Field(default=0.05, ge=0.0, lt=1.0)
    min_relative_support: float = Field(default=0.3, ge=0.0, le=1.0)
    label_radius_deg: float = Field(default=15.0, gt=0.0)

    @classmethod
    def from_settings(cls, settings) -> "ExtractorConfig":
        return cls(
            viewport_size=settings.viewport_size,
            half_fov=settings.viewport_half_fov,
            points=settings.saliency_points,
            bandwidth_frac=settings.bandwidth_frac,
            saliency_sigma_frac=settings.saliency_sigma_frac,
            min_cluster_fraction=settings.min_cluster_fraction,
            min_relative_support=settings.min_relative_support,
            label_radius_deg=settings.label_radius_deg,
        )
