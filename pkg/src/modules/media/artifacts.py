# src/modules/media/artifacts.py

import json
import logging
import struct
from pathlib import Path

import numpy as np
from PIL import Image
from pydantic import ValidationError

from src.core.errors import DataError, ModelLoadError
from src.modules.gaze.models import MODEL_VERSION, ForestModel
from src.modules.weights.weight_map import WeightMap

logger = logging.getLogger(__name__)

GRID_HEADER = struct.Struct("<II")


# --- Forest models ---


def save_model(model: ForestModel, path: Path) -> None:
    path = Path(path)
    path.write_text(model.model_dump_json(indent=1), encoding="utf-8")
    logger.info(f"Saved {model.tree_count}-tree model {model.model_id} to {path}")


def load_model(path: Path) -> ForestModel:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ModelLoadError(f"{path}: cannot read model JSON: {e}") from e
    if not isinstance(raw, dict) or raw.get("version") != MODEL_VERSION:
        found = raw.get("version") if isinstance(raw, dict) else None
        raise ModelLoadError(f"{path}: model version {found!r} is not {MODEL_VERSION}")
    try:
        model = ForestModel.model_validate(raw)
    except ValidationError as e:
        err = e.errors()[0]
        where = ".".join(str(x) for x in err["loc"]) or "model"
        raise ModelLoadError(f"{path}: {where}: {err['msg']}") from e
    logger.debug(f"Loaded model {model.model_id} ({model.tree_count} trees) from {path}")
    return model


# --- Float grids (weight maps, heat maps) ---


def save_float_grid(grid: np.ndarray, path: Path) -> None:
    """Writes `<II` (W, H) followed by little-endian float64 values, row-major."""
    height, width = grid.shape
    with open(path, "wb") as f:
        f.write(GRID_HEADER.pack(width, height))
        f.write(np.ascontiguousarray(grid, dtype="<f8").tobytes())


def load_float_grid(path: Path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as f:
        header = f.read(GRID_HEADER.size)
        if len(header) < GRID_HEADER.size:
            raise DataError(f"{path}: truncated grid header")
        width, height = GRID_HEADER.unpack(header)
        data = f.read()
    expected = 8 * width * height
    if len(data) != expected:
        raise DataError(f"{path}: {width}x{height} grid needs {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f8").reshape(height, width).astype(np.float64)


def save_weight_map(wmap: WeightMap, path: Path) -> None:
    save_float_grid(wmap.weights, path)


def load_weight_map(path: Path) -> WeightMap:
    grid = load_float_grid(path)
    try:
        return WeightMap(width=grid.shape[1], height=grid.shape[0], weights=grid, source_id=str(path))
    except ValidationError as e:
        raise DataError(f"{path}: not a normalized weight map: {e.errors()[0]['msg']}") from e


def write_pgm16(grid: np.ndarray, path: Path) -> None:
    """Exports a nonnegative grid as a 16-bit PGM scaled so its maximum is 65535."""
    peak = float(grid.max()) if grid.size else 0.0
    scaled = grid / peak * 65535.0 if peak > 0 else np.zeros_like(grid)
    pixels = np.clip(np.rint(scaled), 0, 65535).astype(np.uint16)
    Image.fromarray(pixels).save(path, format="PPM")
