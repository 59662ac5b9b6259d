# tests/test_storage.py

import numpy as np

from src.core.storage import ArtifactStore
from src.modules.weights.weight_map import ncp_weight_map


def test_cache_miss_then_hit(tmp_path):
    store = ArtifactStore(tmp_path / "cache")
    store.init_store()
    calls = []

    def build():
        calls.append(1)
        return ncp_weight_map(36, 18)

    first = store.get_weight_map(36, 18, build)
    second = store.get_weight_map(36, 18, build)
    assert len(calls) == 1
    assert store.weight_map_path(36, 18).exists()
    np.testing.assert_array_equal(first.weights, second.weights)
    assert first.source_id == second.source_id


def test_cache_key_depends_on_grid_and_parameters(tmp_path):
    store = ArtifactStore(tmp_path)
    assert store.weight_map_path(36, 18) != store.weight_map_path(72, 36)
    assert store.weight_map_path(36, 18) != store.weight_map_path(36, 18, step_deg=0.5)
    assert store.weight_map_path(36, 18) == store.weight_map_path(36, 18)


def test_store_leaves_no_temp_files(tmp_path):
    store = ArtifactStore(tmp_path)
    store.init_store()
    store.get_weight_map(36, 18, lambda: ncp_weight_map(36, 18))
    assert [p.suffix for p in tmp_path.iterdir()] == [".bin"]
