# src/modules/media/models.py

from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from src.modules.geometry.models import SphereDirection


# --- Raw video ---


class Frame(BaseModel):
    """One planar I420 picture. Planes are stored row-major as (rows, columns)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    width: int = Field(..., gt=0)
    height: int = Field(..., gt=0)
    luma: np.ndarray
    chroma_u: np.ndarray
    chroma_v: np.ndarray

    @model_validator(mode="after")
    def _check_planes(self) -> "Frame":
        if self.width % 2 or self.height % 2:
            raise ValueError(f"Frame dimensions must be even, got {self.width}x{self.height}")
        if self.luma.shape != (self.height, self.width):
            raise ValueError(f"Luma plane shape {self.luma.shape} != {(self.height, self.width)}")
        chroma_shape = (self.height // 2, self.width // 2)
        for name in ("chroma_u", "chroma_v"):
            plane = getattr(self, name)
            if plane.shape != chroma_shape:
                raise ValueError(f"{name} plane shape {plane.shape} != {chroma_shape}")
        for name in ("luma", "chroma_u", "chroma_v"):
            if getattr(self, name).dtype != np.uint8:
                raise ValueError(f"{name} plane must be 8-bit")
        return self

    @classmethod
    def from_luma(cls, luma: np.ndarray, chroma: int = 128) -> "Frame":
        """Builds a frame around a luma plane with flat chroma."""
        luma = np.ascontiguousarray(luma, dtype=np.uint8)
        height, width = luma.shape
        flat = np.full((height // 2, width // 2), chroma, dtype=np.uint8)
        return cls(width=width, height=height, luma=luma, chroma_u=flat, chroma_v=flat.copy())

    @property
    def byte_size(self) -> int:
        return self.width * self.height * 3 // 2


# --- Viewing-direction traces ---


class TraceRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    subject_id: str
    sequence_id: str
    sample_index: int = Field(..., ge=0)
    direction: SphereDirection


class TraceSet(BaseModel):
    """Head-movement samples of every subject on every sequence."""

    model_config = ConfigDict(frozen=True)

    records: List[TraceRecord]
    sample_rate: float = Field(..., gt=0)

    _by_pair: Dict[tuple, List[TraceRecord]] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_unique(self) -> "TraceSet":
        seen = set()
        for rec in self.records:
            key = (rec.subject_id, rec.sequence_id, rec.sample_index)
            if key in seen:
                raise ValueError(f"Duplicate trace sample {key}")
            seen.add(key)
        return self

    def model_post_init(self, __context) -> None:
        groups = defaultdict(list)
        for rec in self.records:
            groups[(rec.subject_id, rec.sequence_id)].append(rec)
        for key in groups:
            groups[key].sort(key=lambda r: r.sample_index)
        self._by_pair = dict(groups)

    @property
    def subjects(self) -> List[str]:
        return sorted({r.subject_id for r in self.records})

    @property
    def sequences(self) -> List[str]:
        return sorted({r.sequence_id for r in self.records})

    def pairs(self) -> List[tuple]:
        return sorted(self._by_pair)

    def samples(self, subject_id: str, sequence_id: str) -> List[TraceRecord]:
        """Samples of one subject on one sequence, ordered by sample index."""
        return self._by_pair.get((subject_id, sequence_id), [])

    def subset(self, subject_ids) -> "TraceSet":
        keep = set(subject_ids)
        return TraceSet(
            records=[r for r in self.records if r.subject_id in keep],
            sample_rate=self.sample_rate,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "subject_id": [r.subject_id for r in self.records],
                "sequence_id": [r.sequence_id for r in self.records],
                "sample_index": [r.sample_index for r in self.records],
                "longitude_deg": [r.direction.longitude for r in self.records],
                "latitude_deg": [r.direction.latitude for r in self.records],
            }
        )

    def directions_per_frame(
        self, subject_id: str, sequence_id: str, fps: float, frame_count: int
    ) -> List[Optional[SphereDirection]]:
        """
        Direction of a subject at each frame: the first sample whose
        floor(sample_index * fps / sample_rate) equals the frame index.
        Frames between two sampled frames repeat the previous direction;
        frames before the first or after the last sampled frame are None.
        """
        per_frame: List[Optional[SphereDirection]] = [None] * frame_count
        last_frame = -1
        for rec in self.samples(subject_id, sequence_id):
            idx = int(np.floor(rec.sample_index * fps / self.sample_rate))
            if 0 <= idx < frame_count and per_frame[idx] is None:
                per_frame[idx] = rec.direction
                last_frame = max(last_frame, idx)
        last = None
        for i in range(last_frame + 1):
            if per_frame[i] is None:
                per_frame[i] = last
            else:
                last = per_frame[i]
        return per_frame


# --- Subjective scores ---


class ScoreEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    subject_id: str
    sequence_id: str
    raw_score: float = Field(..., ge=0.0, le=100.0)


class ScoreTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    entries: List[ScoreEntry]
    reference_of: Dict[str, str]

    @model_validator(mode="after")
    def _check_references(self) -> "ScoreTable":
        references = set(self.reference_of.values())
        for entry in self.entries:
            if entry.sequence_id not in self.reference_of and entry.sequence_id not in references:
                raise ValueError(f"Sequence {entry.sequence_id} has no reference mapping")
        return self

    @property
    def impaired(self) -> List[str]:
        return sorted(self.reference_of)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(e.subject_id, e.sequence_id, e.raw_score) for e in self.entries],
            columns=["subject_id", "sequence_id", "raw_score"],
        )


# --- Sequence manifest ---


class ManifestEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    sequence_id: str
    path: Path
    width: int = Field(..., gt=0)
    height: int = Field(..., gt=0)
    frame_count: int = Field(..., ge=1)
    role: Literal["reference", "impaired"]
    reference_id: Optional[str] = None


class Manifest(BaseModel):
    model_config = ConfigDict(frozen=True)

    sequences: List[ManifestEntry]

    @model_validator(mode="after")
    def _check_pairs(self) -> "Manifest":
        by_id = {s.sequence_id: s for s in self.sequences}
        if len(by_id) != len(self.sequences):
            raise ValueError("Duplicate sequence_id in manifest")
        for seq in self.sequences:
            if seq.role != "impaired":
                continue
            ref = by_id.get(seq.reference_id or "")
            if ref is None:
                raise ValueError(f"Impaired sequence {seq.sequence_id} has no reference")
            if (ref.width, ref.height) != (seq.width, seq.height):
                raise ValueError(
                    f"Sequence {seq.sequence_id} is {seq.width}x{seq.height} but its "
                    f"reference {ref.sequence_id} is {ref.width}x{ref.height}"
                )
        return self

    def get(self, sequence_id: str) -> ManifestEntry:
        for seq in self.sequences:
            if seq.sequence_id == sequence_id:
                return seq
        raise KeyError(sequence_id)
