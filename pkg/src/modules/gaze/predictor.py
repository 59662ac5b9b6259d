# src/modules/gaze/predictor.py

import logging
import time
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from tqdm import tqdm

from src.core.errors import ArgumentError, SchemaError, TrainingError
from src.modules.geometry.models import SphereDirection
from src.modules.geometry.sphere import angular_distance, angular_distance_deg
from src.modules.jobs.worker import run_work_units
from src.modules.media.models import Frame, Manifest, TraceSet
from src.modules.media.yuv import YuvReader
from src.utils import format_duration, format_rate
from .candidates import derive_seed, extract_candidates
from .forest import forest_posteriors
from .models import FEATURE_COUNT, Candidate, ExtractorConfig, ForestModel, Trajectory

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["frame_index", "longitude_deg", "latitude_deg"]


class TrainingSet(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    features: np.ndarray
    labels: np.ndarray
    candidate_count: int = 0

    @property
    def rows(self) -> int:
        return int(self.labels.size)

    @property
    def positives(self) -> int:
        return int(self.labels.sum())

    @classmethod
    def concat(cls, parts: Iterable["TrainingSet"]) -> "TrainingSet":
        parts = list(parts)
        if not parts:
            return cls(features=np.zeros((0, FEATURE_COUNT)), labels=np.zeros(0, dtype=int))
        return cls(
            features=np.concatenate([p.features for p in parts]).reshape(-1, FEATURE_COUNT),
            labels=np.concatenate([p.labels for p in parts]).astype(int),
            candidate_count=sum(p.candidate_count for p in parts),
        )


def label_candidates(candidates: Sequence[Candidate], next_direction: SphereDirection, radius_deg: float) -> np.ndarray:
    """1 for the candidate nearest the next direction when within radius_deg, else 0."""
    labels = np.zeros(len(candidates), dtype=int)
    if not candidates:
        return labels
    lon = np.array([c.direction.longitude for c in candidates])
    lat = np.array([c.direction.latitude for c in candidates])
    distances = angular_distance_deg(lon, lat, next_direction.longitude, next_direction.latitude)
    nearest = int(np.argmin(distances))
    if distances[nearest] <= radius_deg:
        labels[nearest] = 1
    return labels


def training_rows_for_pair(
    frames: Sequence[Frame],
    directions: Sequence[Optional[SphereDirection]],
    seed: int,
    config: ExtractorConfig,
    keys: Tuple[str, str] = ("", ""),
) -> TrainingSet:
    """Rows of one subject on one sequence: candidates at t labeled by the direction at t+1."""
    features, labels, total = [], [], 0
    for t in range(len(directions) - 1):
        current, nxt = directions[t], directions[t + 1]
        if current is None or nxt is None:
            continue
        candidates = extract_candidates(
            frames[t], frames[t - 1] if t > 0 else None, current, derive_seed(seed, *keys, t), config
        )
        total += len(candidates)
        features.extend(c.features.as_array() for c in candidates)
        labels.append(label_candidates(candidates, nxt, config.label_radius_deg))
    return TrainingSet(
        features=np.array(features, dtype=np.float64).reshape(-1, FEATURE_COUNT),
        labels=np.concatenate(labels) if labels else np.zeros(0, dtype=int),
        candidate_count=total,
    )


def training_pairs(manifest: Manifest, traces: TraceSet) -> List[Tuple[str, str]]:
    """Every (subject, sequence) pair to train on; raises if any pair lacks a trace."""
    if not traces.subjects:
        raise TrainingError("Trace set holds no subjects")
    sequences = [s.sequence_id for s in manifest.sequences]
    pairs = [(subj, seq) for subj in traces.subjects for seq in sequences]
    missing = [p for p in pairs if not traces.samples(*p)]
    if missing:
        raise TrainingError("Traces are missing subject/sequence pairs", missing)
    return pairs


def rows_for_manifest_pair(
    manifest: Manifest, traces: TraceSet, pair: Tuple[str, str], seed: int, config: ExtractorConfig, fps: float
) -> TrainingSet:
    subject_id, sequence_id = pair
    entry = manifest.get(sequence_id)
    with YuvReader(entry.path, entry.width, entry.height, entry.frame_count) as reader:
        directions = traces.directions_per_frame(subject_id, sequence_id, fps, entry.frame_count)
        return training_rows_for_pair(reader, directions, seed, config, keys=(sequence_id, subject_id))


async def build_training_set(
    manifest: Manifest,
    traces: TraceSet,
    seed: int,
    config: Optional[ExtractorConfig] = None,
    fps: float = 25.0,
    threads: int = 1,
    show_progress: bool = False,
) -> TrainingSet:
    """Labeled candidate rows of every subject on every sequence, one work unit per pair."""
    config = config or ExtractorConfig()
    start = time.monotonic()
    pairs = training_pairs(manifest, traces)
    parts = await run_work_units(
        pairs,
        lambda pair: rows_for_manifest_pair(manifest, traces, pair, seed, config, fps),
        threads,
        "Training rows",
        show_progress,
    )
    result = TrainingSet.concat(parts)
    logger.info(
        f"Built {result.rows} training rows ({result.positives} positive) from {len(pairs)} "
        f"subject/sequence pairs in {format_duration(time.monotonic() - start)}"
    )
    return result


def predict_direction(
    m: ForestModel, candidates: Sequence[Candidate], current: Optional[SphereDirection] = None
) -> SphereDirection:
    """MAP choice; ties go to the candidate closest to `current`, then to list order."""
    if not candidates:
        raise ArgumentError("Cannot predict a direction from an empty candidate list")
    if any(c.features is None for c in candidates):
        raise ArgumentError("Every candidate needs features before prediction")
    g = forest_posteriors(m, [c.features for c in candidates])
    best = np.flatnonzero(g == g.max())
    if best.size > 1 and current is not None:
        distances = [angular_distance(candidates[i].direction, current) for i in best]
        best = best[[int(np.argmin(distances))]]
    return candidates[int(best[0])].direction


def predict_trajectory(
    frames: Sequence[Frame],
    m: ForestModel,
    seed: int,
    config: Optional[ExtractorConfig] = None,
    sequence_id: str = "",
    show_progress: bool = False,
) -> Trajectory:
    """Simulates one viewer from the front center, frame by frame."""
    config = config or ExtractorConfig()
    count = len(frames)
    if count < 1:
        raise ArgumentError("Sequence has no frames")
    start = time.monotonic()
    directions = [SphereDirection.front()]
    for t in tqdm(range(count - 1), desc=f"Predicting {sequence_id}", disable=not show_progress):
        candidates = extract_candidates(
            frames[t], frames[t - 1] if t > 0 else None, directions[t], derive_seed(seed, sequence_id, t), config
        )
        directions.append(predict_direction(m, candidates, directions[t]))
    logger.info(
        f"Predicted trajectory for {sequence_id or 'sequence'}: "
        f"{format_rate(count, time.monotonic() - start)}"
    )
    return Trajectory(sequence_id=sequence_id or None, directions=directions)


def save_trajectory(trajectory: Trajectory, path: Path) -> None:
    pd.DataFrame(
        [(i, d.longitude, d.latitude) for i, d in enumerate(trajectory.directions)],
        columns=TRAJECTORY_COLUMNS,
    ).to_csv(path, index=False, lineterminator="\n")


def load_trajectory(path: Path) -> Trajectory:
    df = pd.read_csv(path)
    missing = [c for c in TRAJECTORY_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: trajectory file lacks columns {missing}")
    df = df.sort_values("frame_index")
    return Trajectory(
        directions=[
            SphereDirection(longitude=float(lo), latitude=float(la))
            for lo, la in zip(df["longitude_deg"], df["latitude_deg"])
        ]
    )
