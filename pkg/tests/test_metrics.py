# tests/test_metrics.py

import numpy as np
import pytest

from src.core.errors import ArgumentError, DimensionError
from src.modules.geometry.models import SphereDirection
from src.modules.geometry.sphere import pixel_grid_lonlat
from src.modules.quality import metrics
from src.modules.weights.weight_map import WeightMap, ncp_weight_map

W, H = 72, 36


@pytest.fixture(scope="module")
def ncp():
    return ncp_weight_map(W, H)


def test_psnr_constant_error():
    ref = np.full((H, W), 100.0)
    assert metrics.psnr(ref, ref + 16) == pytest.approx(10 * np.log10(255**2 / 256), abs=1e-9)
    assert metrics.psnr(ref, ref + 16) == pytest.approx(24.05, abs=0.01)


def test_identical_frames_hit_the_cap(ncp):
    ref = np.random.default_rng(0).integers(0, 256, (H, W))
    assert metrics.psnr(ref, ref) == 100.0
    assert metrics.ncp_psnr(ref, ref, ncp) == 100.0
    assert metrics.psnr(ref, ref, cap=60.0) == 60.0


def test_uniform_weights_reduce_to_psnr(rng):
    ref = rng.integers(0, 256, (H, W))
    dist = np.clip(ref + rng.integers(-20, 21, (H, W)), 0, 255)
    uniform = WeightMap.uniform(W, H)
    assert metrics.ncp_psnr(ref, dist, uniform) == pytest.approx(metrics.psnr(ref, dist), abs=1e-9)
    assert metrics.weighted_ssim(ref, dist, uniform) == pytest.approx(metrics.mean_ssim(ref, dist), abs=1e-12)


def test_weighted_mse_is_not_divided_by_pixel_count(ncp):
    ref = np.zeros((H, W))
    assert metrics.weighted_mse(ref, ref + 4, ncp) == pytest.approx(16.0)


def test_cp_psnr_ignores_errors_outside_the_viewport(ncp):
    lon, _ = pixel_grid_lonlat(W, H)
    ref = np.full((H, W), 120.0)
    dist = ref.copy()
    dist[:, np.abs(lon) > 150] += 30
    front = SphereDirection.front()
    back = SphereDirection(longitude=180.0, latitude=0.0)
    assert metrics.cp_psnr(ref, dist, ncp, front) == 100.0
    assert metrics.cp_psnr(ref, dist, ncp, back) < 40.0
    assert metrics.ncp_psnr(ref, dist, ncp) < 100.0


def test_cp_ssim_inside_and_outside(ncp, rng):
    lon, _ = pixel_grid_lonlat(W, H)
    ref = rng.integers(0, 256, (H, W)).astype(float)
    dist = ref.copy()
    dist[:, np.abs(lon) > 150] = 128
    assert metrics.cp_ssim(ref, dist, ncp, SphereDirection.front()) == pytest.approx(1.0, abs=1e-9)
    assert metrics.cp_ssim(ref, dist, ncp, SphereDirection(longitude=180.0, latitude=0.0)) < 0.5


def test_ssim_properties(rng):
    ref = rng.integers(0, 256, (H, W)).astype(float)
    noisy = np.clip(ref + rng.normal(0, 25, ref.shape), 0, 255)
    assert metrics.mean_ssim(ref, ref) == pytest.approx(1.0)
    s = metrics.mean_ssim(ref, noisy)
    assert -1.0 <= s < 1.0
    assert metrics.mean_ssim(noisy, ref) == pytest.approx(s)
    very_noisy = np.clip(ref + rng.normal(0, 80, ref.shape), 0, 255)
    assert metrics.mean_ssim(ref, very_noisy) < s
    assert metrics.ssim_map(ref, noisy).shape == (H, W)


def test_shape_checks(ncp):
    with pytest.raises(DimensionError):
        metrics.psnr(np.zeros((H, W)), np.zeros((H, W + 2)))
    with pytest.raises(DimensionError):
        metrics.ncp_psnr(np.zeros((4, 8)), np.zeros((4, 8)), ncp)
    with pytest.raises(ArgumentError):
        metrics.mean_ssim(np.zeros((8, 8)), np.zeros((8, 8)))
