# src/modules/quality/scorer.py

import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, get_args

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.errors import ArgumentError, DataError, DimensionError
from src.modules.gaze.models import ExtractorConfig, ForestModel, Trajectory
from src.modules.gaze.predictor import predict_trajectory
from src.modules.geometry.viewport import DEFAULT_HALF_FOV
from src.modules.media.models import Frame
from src.modules.media.tables import write_rows
from src.modules.weights.weight_map import WeightMap
from src.utils import format_rate
from . import metrics
from .metrics import PSNR_CAP_DB, FrameScore

logger = logging.getLogger(__name__)

MetricName = Literal["psnr", "ssim", "ncp-psnr", "cp-psnr", "ncp-ssim", "cp-ssim"]
METRICS: tuple[str, ...] = get_args(MetricName)


def needs_weights(metric: str) -> bool:
    return metric.startswith(("ncp-", "cp-"))


def needs_model(metric: str) -> bool:
    return metric.startswith("cp-")


class MetricReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    metric: MetricName
    sequence_id: Optional[str] = None
    scores: List[FrameScore]
    mean: float
    weight_map_id: Optional[str] = None
    model_id: Optional[str] = None
    seed: Optional[int] = None
    extra: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_mean(self) -> "MetricReport":
        if not self.scores:
            raise ValueError("A report needs at least one frame score")
        expected = float(np.mean([s.value for s in self.scores]))
        if self.mean != expected:
            raise ValueError(f"Report mean {self.mean} is not the frame average {expected}")
        return self

    @classmethod
    def from_scores(cls, metric: str, scores: List[FrameScore], **provenance) -> "MetricReport":
        scores = sorted(scores, key=lambda s: s.frame_index)
        return cls(metric=metric, scores=scores, mean=float(np.mean([s.value for s in scores])), **provenance)


def check_request(metric: str, weights: Optional[WeightMap], model: Optional[ForestModel]) -> None:
    if metric not in METRICS:
        raise ArgumentError(f"Unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    if needs_weights(metric) and weights is None:
        raise ArgumentError(f"{metric} needs a weight map")
    if needs_model(metric) and model is None:
        raise ArgumentError(f"{metric} needs a trained model (--model)")


def score_frame(
    metric: str,
    ref: Frame,
    dist: Frame,
    weights: Optional[WeightMap] = None,
    direction=None,
    half_fov: float = DEFAULT_HALF_FOV,
    cap: float = PSNR_CAP_DB,
) -> float:
    if (ref.width, ref.height) != (dist.width, dist.height):
        raise DimensionError((ref.width, ref.height), (dist.width, dist.height))
    if metric == "psnr":
        return metrics.psnr(ref, dist, cap)
    if metric == "ssim":
        return metrics.mean_ssim(ref, dist)
    if metric == "ncp-psnr":
        return metrics.ncp_psnr(ref, dist, weights, cap)
    if metric == "ncp-ssim":
        return metrics.weighted_ssim(ref, dist, weights)
    if metric == "cp-psnr":
        return metrics.cp_psnr(ref, dist, weights, direction, half_fov, cap)
    if metric == "cp-ssim":
        return metrics.cp_ssim(ref, dist, weights, direction, half_fov)
    raise ArgumentError(f"Unknown metric {metric!r}")


def score_frame_range(
    metric: str,
    ref: Sequence[Frame],
    dist: Sequence[Frame],
    start: int,
    stop: int,
    weights: Optional[WeightMap] = None,
    trajectory: Optional[Trajectory] = None,
    half_fov: float = DEFAULT_HALF_FOV,
    cap: float = PSNR_CAP_DB,
) -> List[FrameScore]:
    """Scores frames start..stop-1; CP metrics take frame t's direction from the trajectory."""
    scores = []
    for t in range(start, stop):
        direction = trajectory.directions[t] if trajectory is not None else None
        value = score_frame(metric, ref[t], dist[t], weights, direction, half_fov, cap)
        scores.append(FrameScore(frame_index=t, value=value))
    return scores


def check_sequences(ref: Sequence[Frame], dist: Sequence[Frame]) -> int:
    if len(ref) != len(dist):
        raise DataError(f"Frame count mismatch: reference has {len(ref)}, impaired has {len(dist)}")
    if len(ref) == 0:
        raise DataError("Sequences hold no frames")
    return len(ref)


def score_sequence(
    ref: Sequence[Frame],
    dist: Sequence[Frame],
    metric: str,
    weights: Optional[WeightMap] = None,
    model: Optional[ForestModel] = None,
    seed: int = 2018,
    config: Optional[ExtractorConfig] = None,
    sequence_id: Optional[str] = None,
    cap: float = PSNR_CAP_DB,
    show_progress: bool = False,
) -> MetricReport:
    """
    Scores every frame pair and averages. CP metrics first predict one viewing
    trajectory over the impaired sequence, then weight frame t by its viewport.
    """
    check_request(metric, weights, model)
    count = check_sequences(ref, dist)
    config = config or ExtractorConfig()

    start = time.monotonic()
    trajectory = None
    if needs_model(metric):
        trajectory = predict_trajectory(
            dist, model, seed, config, sequence_id=sequence_id or "", show_progress=show_progress
        )
    scores = score_frame_range(metric, ref, dist, 0, count, weights, trajectory, config.half_fov, cap)
    logger.info(f"Scored {metric} on {format_rate(count, time.monotonic() - start)}")
    return build_report(metric, scores, sequence_id, weights, model, seed)


def build_report(
    metric: str,
    scores: List[FrameScore],
    sequence_id: Optional[str],
    weights: Optional[WeightMap],
    model: Optional[ForestModel],
    seed: int,
) -> MetricReport:
    return MetricReport.from_scores(
        metric,
        scores,
        sequence_id=sequence_id,
        weight_map_id=weights.source_id if weights is not None and needs_weights(metric) else None,
        model_id=model.model_id if model is not None and needs_model(metric) else None,
        seed=seed if needs_model(metric) else None,
    )


def write_report_csv(report: MetricReport, path: Path) -> None:
    rows = [(s.frame_index, s.value) for s in report.scores] + [("mean", report.mean)]
    write_rows(path, ["frame_index", "score"], rows)


def write_report_json(report: MetricReport, path: Path) -> None:
    payload = report.model_dump(mode="json")
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
