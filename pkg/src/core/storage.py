# src/core/storage.py

import logging
import os
import tempfile
import threading
from pathlib import Path
from typing import Callable, Optional

from src.modules.media.artifacts import load_weight_map, save_weight_map
from src.modules.weights.gmm import DEFAULT_GMM, GmmParams
from src.modules.weights.weight_map import WeightMap, ncp_source_id
from src.utils import short_digest

logger = logging.getLogger(__name__)

CACHE_DIR = Path(".ovq_cache")


class ArtifactStore:
    """Manages on-disk caches of precomputed weight maps."""

    def __init__(self, cache_dir: Optional[Path] = None):
        self.cache_dir = Path(cache_dir or CACHE_DIR)
        self._write_lock = threading.Lock()  # Serializes cache writes across worker threads

    def init_store(self) -> None:
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        logger.debug(f"Artifact cache at {self.cache_dir.resolve()}")

    def weight_map_path(
        self, width: int, height: int, params: GmmParams = DEFAULT_GMM, step_deg: float = 1.0, half_fov: float = 30.0
    ) -> Path:
        key = short_digest(f"{params.param_id}|{step_deg!r}|{half_fov!r}")
        return self.cache_dir / f"ncp_{width}x{height}_{key}.bin"

    def get_weight_map(
        self,
        width: int,
        height: int,
        build: Callable[[], WeightMap],
        params: GmmParams = DEFAULT_GMM,
        step_deg: float = 1.0,
        half_fov: float = 30.0,
    ) -> WeightMap:
        """Returns the cached NCP map for these dimensions, building and storing it on a miss."""
        path = self.weight_map_path(width, height, params, step_deg, half_fov)
        if path.exists():
            logger.info(f"Weight map cache hit: {path}")
            return load_weight_map(path).model_copy(update={"source_id": ncp_source_id(params, step_deg, half_fov)})

        logger.info(f"Weight map cache miss for {width}x{height}, building")
        wmap = build()
        self.store_weight_map(wmap, path)
        return wmap

    def store_weight_map(self, wmap: WeightMap, path: Path) -> None:
        path = Path(path)
        with self._write_lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            os.close(fd)
            try:
                save_weight_map(wmap, Path(tmp))
                os.replace(tmp, path)
            except Exception:
                Path(tmp).unlink(missing_ok=True)
                raise
        logger.info(f"Stored {wmap.width}x{wmap.height} weight map at {path}")
