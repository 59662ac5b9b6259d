# src/modules/evaluation/stats.py

import json
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from scipy import optimize, special, stats

from src.core.errors import ArgumentError, DataError, FitError
from src.modules.geometry.models import REGIONS

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 5
MAX_ITERATIONS = 10_000
SSE_TOLERANCE = 1e-10


class EvalStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    srcc: float
    pcc: float
    rmse: float
    mae: float
    betas: Tuple[float, float, float, float]
    fitted: Dict[str, float]
    converged: bool = True


def _vectors(x, y) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(x, dtype=np.float64).ravel()
    b = np.asarray(y, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ArgumentError(f"Length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ArgumentError("Need at least 2 values")
    return a, b


def pcc(x, y) -> float:
    a, b = _vectors(x, y)
    da, db = a - a.mean(), b - b.mean()
    norm = np.sqrt(np.sum(da**2) * np.sum(db**2))
    if norm == 0:
        raise DataError("Correlation of a constant vector is undefined")
    return float(np.sum(da * db) / norm)


def srcc(x, y) -> float:
    """Pearson correlation of average ranks."""
    a, b = _vectors(x, y)
    return pcc(stats.rankdata(a, method="average"), stats.rankdata(b, method="average"))


def rmse(x, y) -> float:
    a, b = _vectors(x, y)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mae(x, y) -> float:
    a, b = _vectors(x, y)
    return float(np.mean(np.abs(a - b)))


def logistic(q, betas) -> np.ndarray:
    """Q' = b2 + (b1 - b2) / (1 + exp(-(Q - b3) / |b4|))."""
    b1, b2, b3, b4 = betas
    scale = max(abs(b4), np.finfo(np.float64).tiny)
    return b2 + (b1 - b2) * special.expit((np.asarray(q, dtype=np.float64) - b3) / scale)


def logistic_fit(objective, subjective) -> Tuple[Tuple[float, float, float, float], np.ndarray, bool]:
    """
    Least-squares fit of the logistic mapping from objective scores to
    (already reversed) subjective scores. Returns betas with |b4|, the
    fitted values and whether the optimizer converged.
    """
    q, target = _vectors(objective, subjective)
    if q.size < MIN_FIT_POINTS:
        raise FitError(f"Logistic fit needs at least {MIN_FIT_POINTS} points, got {q.size}")
    if np.ptp(q) == 0:
        raise FitError("Objective scores are constant; logistic fit is undefined")

    start = np.array([target.max(), target.min(), q.mean(), q.std() / 4.0])
    if start[0] == start[1]:
        start[0] += 1.0
    # Falling trend: start from the decreasing curve.
    if np.corrcoef(q, target)[0, 1] < 0:
        start[[0, 1]] = start[[1, 0]]

    def residuals(b: np.ndarray) -> np.ndarray:
        return logistic(q, b) - target

    result = optimize.least_squares(
        residuals, start, method="lm", ftol=SSE_TOLERANCE, xtol=1e-15, gtol=1e-15, max_nfev=MAX_ITERATIONS
    )
    best = result.x
    converged = bool(result.status > 0)
    if np.sum(residuals(best) ** 2) > np.sum(residuals(start) ** 2):
        best = start
    if not converged:
        logger.warning(f"Logistic fit did not converge ({result.message}); reporting best-so-far")

    betas = (float(best[0]), float(best[1]), float(best[2]), float(abs(best[3])))
    return betas, logistic(q, betas), converged


def _as_score(value) -> float:
    # MetricReport or plain number.
    return float(getattr(value, "mean", value))


def evaluate_metric(objective: Mapping[str, Union[float, object]], dmos: Mapping[str, float]) -> EvalStats:
    """Reverses DMOS (100 - DMOS), fits the logistic, and scores the fitted values."""
    only_obj = sorted(set(objective) - set(dmos))
    only_dmos = sorted(set(dmos) - set(objective))
    if only_obj or only_dmos:
        raise DataError(
            f"Sequence sets differ: objective only {only_obj or '[]'}, DMOS only {only_dmos or '[]'}"
        )
    sequences = sorted(objective)
    q = np.array([_as_score(objective[s]) for s in sequences])
    target = 100.0 - np.array([float(dmos[s]) for s in sequences])

    betas, fitted, converged = logistic_fit(q, target)
    # SRCC of (fitted, target). The logistic is strictly monotone, so the
    # fitted ranks are the raw ranks, reversed when the curve falls; ranking
    # the raw scores keeps float saturation in the tails from adding ties.
    direction = 1.0 if betas[0] >= betas[1] else -1.0
    return EvalStats(
        srcc=direction * srcc(q, target),
        pcc=pcc(fitted, target) if np.ptp(fitted) > 0 else 0.0,
        rmse=rmse(fitted, target),
        mae=mae(fitted, target),
        betas=betas,
        fitted={s: float(v) for s, v in zip(sequences, fitted)},
        converged=converged,
    )


def regional_srcc(vectors) -> Dict[str, Optional[float]]:
    """SRCC between O-DMOS and each region's DMOS over sequences where that region is valid."""
    result: Dict[str, Optional[float]] = {}
    for region in REGIONS:
        pairs = [
            (v.o_dmos, v.regional[region]) for v in vectors.values() if v.regional.get(region) is not None
        ]
        if len(pairs) < 2:
            result[region.value] = None
            continue
        x, y = zip(*pairs)
        try:
            result[region.value] = srcc(x, y)
        except DataError:
            result[region.value] = None
    return result


def compare_metrics(objectives: Mapping[str, Mapping[str, float]], dmos: Mapping[str, float]) -> pd.DataFrame:
    """One row of statistics per metric, in the order given."""
    rows: List[dict] = []
    for name, table in objectives.items():
        result = evaluate_metric(table, dmos)
        rows.append(
            {"metric": name, "srcc": result.srcc, "pcc": result.pcc, "rmse": result.rmse, "mae": result.mae}
        )
    return pd.DataFrame(rows, columns=["metric", "srcc", "pcc", "rmse", "mae"])


def write_eval_json(result: EvalStats, path: Path, metric: Optional[str] = None) -> None:
    payload = {"metric": metric, **result.model_dump(mode="json")}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
