# tests/test_scorer.py

import numpy as np
import pytest

from src.core.errors import ArgumentError, DataError, DimensionError
from src.modules.quality.metrics import FrameScore
from src.modules.quality.scorer import (
    METRICS,
    MetricReport,
    check_request,
    score_frame,
    score_sequence,
    write_report_csv,
    write_report_json,
)
from src.modules.weights.weight_map import ncp_weight_map


@pytest.fixture(scope="module")
def weights():
    return ncp_weight_map(128, 64)


def test_metric_names():
    assert METRICS == ("psnr", "ssim", "ncp-psnr", "cp-psnr", "ncp-ssim", "cp-ssim")


def test_request_checks(weights, constant_model):
    with pytest.raises(ArgumentError):
        check_request("vmaf", None, None)
    with pytest.raises(ArgumentError):
        check_request("ncp-psnr", None, None)
    with pytest.raises(ArgumentError):
        check_request("cp-ssim", weights, None)
    check_request("cp-ssim", weights, constant_model)
    check_request("psnr", None, None)


def test_frame_size_mismatch(make_frame):
    with pytest.raises(DimensionError):
        score_frame("psnr", make_frame(16, 16), make_frame(32, 16))


@pytest.mark.parametrize("metric,expected", [("psnr", 100.0), ("ssim", 1.0), ("ncp-psnr", 100.0), ("ncp-ssim", 1.0)])
def test_identical_sequences(metric, expected, make_frame, weights):
    frames = [make_frame(128, 64, seed=i) for i in range(3)]
    report = score_sequence(frames, frames, metric, weights=weights)
    assert report.mean == pytest.approx(expected)
    assert [s.frame_index for s in report.scores] == [0, 1, 2]
    assert report.model_id is None and report.seed is None
    assert (report.weight_map_id is None) == (metric in ("psnr", "ssim"))


def test_cp_metric_records_provenance(dot_frame, weights, constant_model, small_config):
    frames = [dot_frame((0.0, 20.0), width=128, height=64)] * 2
    report = score_sequence(frames, frames, "cp-psnr", weights, constant_model, seed=9, config=small_config)
    assert report.mean == 100.0
    assert report.model_id == constant_model.model_id
    assert report.seed == 9
    assert report.weight_map_id == weights.source_id


def test_cp_metric_needs_model(make_frame, weights):
    frames = [make_frame(128, 64)]
    with pytest.raises(ArgumentError):
        score_sequence(frames, frames, "cp-psnr", weights)


def test_sequence_checks(make_frame):
    with pytest.raises(DataError):
        score_sequence([make_frame(16, 16)], [make_frame(16, 16)] * 2, "psnr")
    with pytest.raises(DataError):
        score_sequence([], [], "psnr")


def test_report_mean_is_frame_average():
    scores = [FrameScore(frame_index=1, value=30.0), FrameScore(frame_index=0, value=20.0)]
    report = MetricReport.from_scores("psnr", scores)
    assert report.mean == 25.0
    assert [s.frame_index for s in report.scores] == [0, 1]
    with pytest.raises(ValueError):
        MetricReport(metric="psnr", scores=scores, mean=24.0)


def test_report_files(tmp_path):
    report = MetricReport.from_scores(
        "ncp-psnr", [FrameScore(frame_index=0, value=31.5), FrameScore(frame_index=1, value=32.5)], weight_map_id="x"
    )
    write_report_csv(report, tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines() == ["frame_index,score", "0,31.5", "1,32.5", "mean,32.0"]
    write_report_json(report, tmp_path / "r.json")
    assert MetricReport.model_validate_json((tmp_path / "r.json").read_text()) == report
