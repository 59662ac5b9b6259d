# src/modules/media/tables.py

import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.core.errors import ArgumentError, DataError, ParseError, RangeError, SchemaError
from src.modules.geometry.models import SphereDirection
from src.modules.weights.gmm import GmmParams
from .models import Manifest, ManifestEntry, ScoreEntry, ScoreTable, TraceRecord, TraceSet

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["subject_id", "sequence_id", "sample_index", "longitude_deg", "latitude_deg"]
SCORE_COLUMNS = ["subject_id", "sequence_id", "raw_score"]
REFERENCE_COLUMNS = ["sequence_id", "reference_id"]
MANIFEST_COLUMNS = ["sequence_id", "path", "width", "height", "frame_count", "role", "reference_id"]
GMM_COLUMNS = ["axis", "k", "a", "b", "c"]
SAMPLE_RATE_HEADER = re.compile(r"^#\s*sample_rate\s*=\s*([0-9.eE+-]+)\s*$")


def _read_csv(path: Path, columns: Sequence[str], skiprows: int = 0) -> pd.DataFrame:
    """Reads a CSV as strings and checks its header; line numbers are 1-based file lines."""
    try:
        df = pd.read_csv(
            path, dtype=str, keep_default_na=False, skiprows=skiprows, skipinitialspace=True
        )
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        line = int(match.group(1)) + skiprows if match else 0
        raise ParseError(str(path), line, f"malformed row: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise ParseError(str(path), 1, "file is empty") from e

    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise ParseError(str(path), skiprows + 1, f"header is missing columns {missing}")
    return df


def _line_of(row_position: int, skiprows: int) -> int:
    # +1 for the header row, +1 for 1-based numbering.
    return row_position + skiprows + 2


def _numeric(df: pd.DataFrame, column: str, path: Path, skiprows: int, integer: bool = False) -> np.ndarray:
    values = pd.to_numeric(df[column], errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if integer and not bad.size:
        bad = np.flatnonzero(values != np.floor(values))
    if bad.size:
        pos = int(bad[0])
        raise ParseError(
            str(path), _line_of(pos, skiprows), f"{column}={df[column].iloc[pos]!r} is not a valid number"
        )
    return values


def _check_ids(df: pd.DataFrame, column: str, path: Path, skiprows: int) -> None:
    empty = np.flatnonzero(df[column].str.len().to_numpy() == 0)
    if empty.size:
        raise ParseError(str(path), _line_of(int(empty[0]), skiprows), f"empty {column}")


# --- Traces ---


def load_traces(path: Path, sample_rate: Optional[float] = None) -> TraceSet:
    """
    Loads a trace CSV. The sample rate comes from a leading
    `# sample_rate=<hz>` line, or from the argument when the file has none.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline().strip()
    header_match = SAMPLE_RATE_HEADER.match(first)
    skiprows = 1 if header_match else 0
    if header_match:
        sample_rate = float(header_match.group(1))
    if sample_rate is None:
        raise SchemaError(f"{path}: no '# sample_rate=' header and no sample rate given")

    df = _read_csv(path, TRACE_COLUMNS, skiprows)
    for column in ("subject_id", "sequence_id"):
        _check_ids(df, column, path, skiprows)
    index = _numeric(df, "sample_index", path, skiprows, integer=True)
    lon = _numeric(df, "longitude_deg", path, skiprows)
    lat = _numeric(df, "latitude_deg", path, skiprows)

    for name, values, bound in (("sample_index", index, None), ("longitude_deg", lon, 180.0), ("latitude_deg", lat, 90.0)):
        bad = np.flatnonzero(values < 0) if bound is None else np.flatnonzero(np.abs(values) > bound)
        if bad.size:
            pos = int(bad[0])
            raise RangeError(f"{path}:{_line_of(pos, skiprows)}: {name}={values[pos]} out of range")

    records = [
        TraceRecord(
            subject_id=subj,
            sequence_id=seq,
            sample_index=int(i),
            direction=SphereDirection(longitude=float(lo), latitude=float(la)),
        )
        for subj, seq, i, lo, la in zip(df["subject_id"], df["sequence_id"], index, lon, lat)
    ]
    try:
        traces = TraceSet(records=records, sample_rate=sample_rate)
    except ValidationError as e:
        raise SchemaError(f"{path}: {e.errors()[0]['msg']}") from e
    logger.info(f"Loaded {len(records)} trace samples ({len(traces.pairs())} subject/sequence pairs) from {path}")
    return traces


def save_traces(traces: TraceSet, path: Path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# sample_rate={traces.sample_rate!r}\n")
        traces.to_frame()[TRACE_COLUMNS].to_csv(f, index=False, lineterminator="\n")


# --- Subjective scores ---


def load_scores(scores_path: Path, references_path: Path) -> ScoreTable:
    """Loads raw scores plus the impaired -> reference sequence map."""
    scores_path, references_path = Path(scores_path), Path(references_path)
    df = _read_csv(scores_path, SCORE_COLUMNS)
    for column in ("subject_id", "sequence_id"):
        _check_ids(df, column, scores_path, 0)
    raw = _numeric(df, "raw_score", scores_path, 0)
    bad = np.flatnonzero((raw < 0) | (raw > 100))
    if bad.size:
        pos = int(bad[0])
        raise RangeError(f"{scores_path}:{_line_of(pos, 0)}: raw_score={raw[pos]} outside [0, 100]")

    refs = _read_csv(references_path, REFERENCE_COLUMNS)
    reference_of = dict(zip(refs["sequence_id"], refs["reference_id"]))

    entries = [
        ScoreEntry(subject_id=subj, sequence_id=seq, raw_score=float(score))
        for subj, seq, score in zip(df["subject_id"], df["sequence_id"], raw)
    ]
    try:
        table = ScoreTable(entries=entries, reference_of=reference_of)
    except ValidationError as e:
        raise SchemaError(f"{scores_path}: {e.errors()[0]['msg']}") from e
    logger.info(f"Loaded {len(entries)} raw scores for {len(table.impaired)} impaired sequences")
    return table


def load_sequence_values(path: Path, value_column: str) -> Dict[str, float]:
    """Reads a two-column `sequence_id,<value_column>` CSV (objective scores, DMOS)."""
    path = Path(path)
    df = _read_csv(path, ["sequence_id", value_column])
    values = _numeric(df, value_column, path, 0)
    if df["sequence_id"].duplicated().any():
        dup = df["sequence_id"][df["sequence_id"].duplicated()].iloc[0]
        raise SchemaError(f"{path}: duplicate sequence_id {dup}")
    return dict(zip(df["sequence_id"], values.tolist()))


# --- Manifest ---


def load_manifest(path: Path) -> Manifest:
    """Loads a sequence manifest; relative video paths resolve against the manifest folder."""
    path = Path(path)
    df = _read_csv(path, MANIFEST_COLUMNS)
    entries: List[ManifestEntry] = []
    for pos, row in enumerate(df.to_dict("records")):
        video = Path(row["path"])
        if not video.is_absolute():
            video = path.parent / video
        if not video.exists():
            raise DataError(f"{path}:{_line_of(pos, 0)}: video file {video} not found")
        try:
            entries.append(
                ManifestEntry(
                    sequence_id=row["sequence_id"],
                    path=video,
                    width=row["width"],
                    height=row["height"],
                    frame_count=row["frame_count"],
                    role=row["role"],
                    reference_id=row["reference_id"] or None,
                )
            )
        except ValidationError as e:
            raise ParseError(str(path), _line_of(pos, 0), e.errors()[0]["msg"]) from e
    try:
        return Manifest(sequences=entries)
    except ValidationError as e:
        raise SchemaError(f"{path}: {e.errors()[0]['msg']}") from e


def write_rows(path: Path, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    if any(len(r) != len(columns) for r in rows):
        raise ArgumentError("Row width does not match the column count")
    pd.DataFrame(list(rows), columns=list(columns)).to_csv(path, index=False, lineterminator="\n")


# --- Direction prior override ---


def load_gmm_params(path: Path) -> GmmParams:
    """Reads the six-row `axis,k,a,b,c` override of the direction prior."""
    path = Path(path)
    df = _read_csv(path, GMM_COLUMNS)
    axis = df["axis"].str.strip()
    unknown = np.flatnonzero(~axis.isin(["longitude", "latitude"]).to_numpy())
    if unknown.size:
        pos = int(unknown[0])
        raise ParseError(str(path), _line_of(pos, 0), f"unknown axis {df['axis'].iloc[pos]!r}")
    k = _numeric(df, "k", path, 0, integer=True).astype(int)
    a, b, c = (_numeric(df, column, path, 0) for column in ("a", "b", "c"))

    terms = {}
    for name in ("longitude", "latitude"):
        rows = np.flatnonzero((axis == name).to_numpy())
        if sorted(k[rows].tolist()) != [1, 2, 3]:
            raise SchemaError(f"{path}: {name} needs exactly the terms k=1,2,3")
        rows = rows[np.argsort(k[rows])]
        terms[name] = [(float(a[r]), float(b[r]), float(c[r])) for r in rows]
    try:
        params = GmmParams.from_rows(terms["longitude"], terms["latitude"])
    except ValidationError as e:
        raise SchemaError(f"{path}: {e.errors()[0]['msg']}") from e
    logger.info(f"Loaded GMM override from {path}")
    return params
