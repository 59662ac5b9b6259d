# tests/conftest.py

from pathlib import Path

import numpy as np
import pytest

from src.modules.gaze.models import LEAF, DecisionTreeModel, ExtractorConfig, ForestModel
from src.modules.geometry.models import SphereDirection
from src.modules.media.models import Frame, ScoreEntry, ScoreTable, TraceRecord, TraceSet
from src.modules.media.yuv import write_yuv_frame

GRAY = 64
BRIGHT = 255


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def make_frame():
    def _make(width: int, height: int, seed: int = 0) -> Frame:
        gen = np.random.default_rng(seed)
        return Frame(
            width=width,
            height=height,
            luma=gen.integers(0, 256, (height, width), dtype=np.uint8),
            chroma_u=gen.integers(0, 256, (height // 2, width // 2), dtype=np.uint8),
            chroma_v=gen.integers(0, 256, (height // 2, width // 2), dtype=np.uint8),
        )

    return _make


@pytest.fixture
def dot_frame():
    """Gray 256x128 frames with small bright blocks at the given longitudes on the equator."""

    def _make(longitudes=(0.0,), width: int = 256, height: int = 128, dot: int = 2) -> Frame:
        luma = np.full((height, width), GRAY, dtype=np.uint8)
        row = (height + 1) / 2.0 - 1.0
        half = (dot - 1) / 2.0
        for lon in longitudes:
            col = (width - 1.0) * (0.5 - lon / 360.0)
            r0, c0 = int(round(row - half)), int(round(col - half))
            luma[r0 : r0 + dot, c0 : c0 + dot] = BRIGHT
        return Frame.from_luma(luma)

    return _make


@pytest.fixture
def write_yuv():
    def _write(path: Path, frames) -> Path:
        with open(path, "wb") as f:
            for frame in frames:
                write_yuv_frame(f, frame)
        return path

    return _write


@pytest.fixture
def make_traces():
    """TraceSet from (subject, sequence, sample_index, lon, lat) tuples."""

    def _make(rows, sample_rate: float = 10.0) -> TraceSet:
        return TraceSet(
            records=[
                TraceRecord(
                    subject_id=subj,
                    sequence_id=seq,
                    sample_index=idx,
                    direction=SphereDirection(longitude=lon, latitude=lat),
                )
                for subj, seq, idx, lon, lat in rows
            ],
            sample_rate=sample_rate,
        )

    return _make


@pytest.fixture
def small_config():
    return ExtractorConfig(viewport_size=64, points=2000)


def leaf_tree(posterior: float) -> DecisionTreeModel:
    return DecisionTreeModel(
        feature_index=[LEAF], threshold=[0.0], left=[-1], right=[-1], leaf_posterior=[posterior]
    )


@pytest.fixture
def constant_model():
    return ForestModel(tree_count=1, trees=[leaf_tree(0.5)])


# --- Subjective scores ---
# Three subjects rate impaired sequences A, B, C against reference R.
# Difference scores: s1 (10, 20, 30), s2 (0, 30, 15), s3 (20, 40, 30),
# giving Z = (-1, 0, 1), (-1, 1, 0) and (-1, 1, 0).

TOY_RAW = {
    "s1": {"R": 90, "A": 80, "B": 70, "C": 60},
    "s2": {"R": 100, "A": 100, "B": 70, "C": 85},
    "s3": {"R": 90, "A": 70, "B": 50, "C": 60},
}
TOY_REFERENCES = {"A": "R", "B": "R", "C": "R"}


@pytest.fixture
def toy_scores() -> ScoreTable:
    return ScoreTable(
        entries=[
            ScoreEntry(subject_id=subj, sequence_id=seq, raw_score=score)
            for subj, row in TOY_RAW.items()
            for seq, score in row.items()
        ],
        reference_of=TOY_REFERENCES,
    )


@pytest.fixture
def toy_traces(make_traces) -> TraceSet:
    """
    At 10 Hz: s1 looks back for the first second then front; s2 splits
    front and top; s3 looks left. The first second is discarded.
    """
    rows = []
    for seq in ("A", "B", "C"):
        rows += [("s1", seq, i, 180.0, 0.0) for i in range(10)]
        rows += [("s1", seq, i, 0.0, 0.0) for i in range(10, 20)]
        rows += [("s2", seq, i, 0.0, 0.0) for i in range(10, 20)]
        rows += [("s2", seq, i, 0.0, 90.0) for i in range(20, 30)]
        rows += [("s3", seq, i, 90.0, 0.0) for i in range(10, 20)]
    return make_traces(rows, sample_rate=10.0)


@pytest.fixture
def toy_score_files(tmp_path):
    scores = tmp_path / "scores.csv"
    refs = tmp_path / "references.csv"
    lines = ["subject_id,sequence_id,raw_score"]
    lines += [f"{subj},{seq},{score}" for subj, row in TOY_RAW.items() for seq, score in row.items()]
    scores.write_text("\n".join(lines) + "\n", encoding="utf-8")
    refs.write_text(
        "sequence_id,reference_id\n" + "".join(f"{s},{r}\n" for s, r in TOY_REFERENCES.items()),
        encoding="utf-8",
    )
    return scores, refs
