# src/modules/subjective/scores.py

import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from src.core.errors import SchemaError, ScoreError
from src.modules.geometry.models import REGIONS, RegionId
from src.modules.geometry.sphere import region_indices
from src.modules.media.models import ScoreTable, TraceRecord, TraceSet

logger = logging.getLogger(__name__)

INVALID = "---"
DMOS_COLUMNS = ["sequence_id", "o_dmos"] + [r.value for r in REGIONS]
OUTLIER_SIGMAS = 2.0
OUTLIER_FRACTION = 0.05


class ZScoreTable(BaseModel):
    """Per-subject standardized difference scores; rows are subjects, columns impaired sequences."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    z: pd.DataFrame
    rejected_subjects: List[str] = Field(default_factory=list)
    reasons: Dict[str, str] = Field(default_factory=dict)

    @property
    def retained(self) -> pd.DataFrame:
        return self.z.drop(index=self.rejected_subjects)


class VDmosVector(BaseModel):
    model_config = ConfigDict(frozen=True)

    sequence_id: str
    o_dmos: float
    regional: Dict[RegionId, Optional[float]]

    def values(self) -> List[Optional[float]]:
        """[O-DMOS, front, left, back, right, top, bottom]; None marks an invalid region."""
        return [self.o_dmos] + [self.regional.get(r) for r in REGIONS]

    def as_row(self) -> list:
        return [self.sequence_id] + [INVALID if v is None else v for v in self.values()]


def difference_scores(scores: ScoreTable) -> pd.DataFrame:
    """d_ij = S_ij(reference) - S_ij for every subject i and impaired sequence j."""
    raw = scores.to_frame()
    if raw.duplicated(["subject_id", "sequence_id"]).any():
        subj, seq = raw[raw.duplicated(["subject_id", "sequence_id"])].iloc[0][["subject_id", "sequence_id"]]
        raise ScoreError(f"Subject {subj} scored {seq} more than once")
    table = raw.pivot(index="subject_id", columns="sequence_id", values="raw_score")

    impaired = [seq for seq in scores.impaired if seq in table.columns]
    d = pd.DataFrame(index=table.index, columns=impaired, dtype=np.float64)
    for seq in impaired:
        ref = scores.reference_of[seq]
        for subj in table.index:
            s = table.at[subj, seq]
            if np.isnan(s):
                continue
            s_ref = table.at[subj, ref] if ref in table.columns else np.nan
            if np.isnan(s_ref):
                raise ScoreError(f"Subject {subj} has no score for reference {ref} of {seq}")
            d.at[subj, seq] = s_ref - s
    return d


def z_scores(d: pd.DataFrame) -> ZScoreTable:
    """Z_ij = (d_ij - mu_i) / sigma_i per subject, sigma with an (M_i - 1) denominator."""
    rated = d.notna().sum(axis=1)
    few = rated[rated < 2]
    if not few.empty:
        raise ScoreError(f"Subject {few.index[0]} rated {int(few.iloc[0])} impaired sequences; need at least 2")
    mu = d.mean(axis=1, skipna=True)
    sigma = d.std(axis=1, ddof=1, skipna=True)
    constant = sigma[~(sigma > 0)]
    if not constant.empty:
        raise ScoreError(f"Subject {constant.index[0]} gave identical difference scores; cannot standardize")
    return ZScoreTable(z=d.sub(mu, axis=0).div(sigma, axis=0))


def reject_subjects(z: ZScoreTable, scope: Literal["sequence", "panel"] = "sequence") -> ZScoreTable:
    """
    Rejects subjects with more than 5% of their Z-scores outside mean +/- 2 std.
    The mean and std are taken per sequence across subjects, or over the whole
    panel when scope == "panel".
    """
    values = z.z
    if values.shape[0] < 2:
        raise ScoreError("Subject rejection needs at least 2 subjects")
    if scope == "sequence":
        mu = values.mean(axis=0, skipna=True)
        sigma = values.std(axis=0, ddof=1, skipna=True).fillna(0.0)
        outside = values.sub(mu, axis=1).abs().gt(OUTLIER_SIGMAS * sigma, axis=1)
    else:
        flat = values.stack()
        mu, sigma = float(flat.mean()), float(flat.std(ddof=1))
        outside = (values - mu).abs() > OUTLIER_SIGMAS * sigma
    outside = outside & values.notna()
    fraction = outside.sum(axis=1) / values.notna().sum(axis=1)

    rejected = [subj for subj in values.index if fraction[subj] > OUTLIER_FRACTION]
    reasons = {
        subj: f"{int(outside.loc[subj].sum())} of {int(values.loc[subj].notna().sum())} Z-scores "
        f"({fraction[subj]:.1%}) outside {OUTLIER_SIGMAS:g} std of the {scope} mean"
        for subj in rejected
    }
    for subj, why in reasons.items():
        logger.info(f"Rejected subject {subj}: {why}")
    if len(rejected) == values.shape[0]:
        raise ScoreError("Every subject was rejected; the panel is degenerate")
    return ZScoreTable(z=values, rejected_subjects=rejected, reasons=reasons)


def rescale(z) -> pd.DataFrame:
    """Z' = 100 (Z + 3) / 6 for retained subjects."""
    table = z.retained if isinstance(z, ZScoreTable) else z
    return 100.0 * (table + 3.0) / 6.0


def o_dmos(rescaled: pd.DataFrame) -> pd.Series:
    counts = rescaled.notna().sum(axis=0)
    empty = counts[counts == 0]
    if not empty.empty:
        raise ScoreError(f"Sequence {empty.index[0]} has no valid subject")
    return rescaled.mean(axis=0, skipna=True)


def region_frequencies(
    samples: Sequence[TraceRecord], sample_rate: float, discard_seconds: float = 1.0
) -> Dict[RegionId, float]:
    """Share of samples in each cube region after dropping the first discard_seconds."""
    kept = [r for r in samples if r.sample_index / sample_rate >= discard_seconds]
    if not kept:
        raise ScoreError(f"No trace samples remain after discarding the first {discard_seconds:g} s")
    lon = np.array([r.direction.longitude for r in kept])
    lat = np.array([r.direction.latitude for r in kept])
    counts = np.bincount(region_indices(lon, lat), minlength=len(REGIONS))
    return {region: counts[i] / len(kept) for i, region in enumerate(REGIONS)}


def v_dmos(
    rescaled: pd.DataFrame, traces: TraceSet, f0: float = 1.0 / 6.0, discard_seconds: float = 1.0
) -> Dict[str, VDmosVector]:
    """O-DMOS plus per-region DMOS over subjects with f > f0 in that region."""
    overall = o_dmos(rescaled)
    vectors = {}
    for seq in rescaled.columns:
        scores = rescaled[seq].dropna()
        qualified: Dict[RegionId, List[float]] = {r: [] for r in REGIONS}
        for subj, score in scores.items():
            samples = traces.samples(subj, seq)
            if not samples:
                raise ScoreError(f"No trace for subject {subj} on sequence {seq}")
            freq = region_frequencies(samples, traces.sample_rate, discard_seconds)
            for region, f in freq.items():
                if f > f0:
                    qualified[region].append(score)
        vectors[seq] = VDmosVector(
            sequence_id=seq,
            o_dmos=float(overall[seq]),
            regional={r: float(np.mean(v)) if v else None for r, v in qualified.items()},
        )
    return vectors


def process_scores(
    scores: ScoreTable,
    traces: Optional[TraceSet] = None,
    f0: float = 1.0 / 6.0,
    scope: Literal["sequence", "panel"] = "sequence",
    discard_seconds: float = 1.0,
):
    """Raw scores to (Z table after rejection, rescaled scores, V-DMOS vectors or O-DMOS only)."""
    z = reject_subjects(z_scores(difference_scores(scores)), scope)
    rescaled = rescale(z)
    if traces is None:
        overall = o_dmos(rescaled)
        vectors = {
            seq: VDmosVector(sequence_id=seq, o_dmos=float(v), regional={r: None for r in REGIONS})
            for seq, v in overall.items()
        }
    else:
        vectors = v_dmos(rescaled, traces, f0, discard_seconds)
    logger.info(
        f"Processed scores of {z.z.shape[0]} subjects on {len(vectors)} sequences "
        f"({len(z.rejected_subjects)} rejected)"
    )
    return z, rescaled, vectors


def save_dmos(vectors: Dict[str, VDmosVector], path: Path) -> None:
    rows = [vectors[seq].as_row() for seq in sorted(vectors)]
    pd.DataFrame(rows, columns=DMOS_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def load_dmos(path: Path) -> Dict[str, VDmosVector]:
    """Reads a file written by save_dmos; "---" cells become invalid regions."""
    path = Path(path)
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in DMOS_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: DMOS file lacks columns {missing}")

    def value(cell: str, line: int, column: str) -> Optional[float]:
        if cell.strip() == INVALID:
            return None
        try:
            return float(cell)
        except ValueError:
            raise SchemaError(f"{path}:{line}: {column}={cell!r} is neither a number nor {INVALID}") from None

    vectors = {}
    for pos, row in enumerate(df.to_dict("records")):
        line = pos + 2
        overall = value(row["o_dmos"], line, "o_dmos")
        if overall is None:
            raise SchemaError(f"{path}:{line}: o_dmos cannot be {INVALID}")
        vectors[row["sequence_id"]] = VDmosVector(
            sequence_id=row["sequence_id"],
            o_dmos=overall,
            regional={r: value(row[r.value], line, r.value) for r in REGIONS},
        )
    return vectors
