# tests/test_app.py

import asyncio
import json

import numpy as np
import pandas as pd
import pytest

from src.app import run
from src.modules.gaze.models import LEAF, DecisionTreeModel, ForestModel
from src.modules.media.artifacts import load_model, save_model, save_weight_map
from src.modules.weights.weight_map import WeightMap


def cli(*argv) -> int:
    return asyncio.run(run([str(a) for a in argv]))


@pytest.fixture
def videos(tmp_path, make_frame, write_yuv):
    ref = [make_frame(128, 64, seed=i) for i in range(3)]
    dist = []
    for f in ref:
        luma = np.clip(f.luma.astype(int) + 12, 0, 255).astype(np.uint8)
        dist.append(f.model_copy(update={"luma": luma}))
    return write_yuv(tmp_path / "ref.yuv", ref), write_yuv(tmp_path / "dist.yuv", dist)


def report(path):
    return json.loads(path.with_suffix(".json").read_text())


def test_help_exits_cleanly(capsys):
    assert cli("--help") == 0
    assert "weightmap" in capsys.readouterr().out


def test_usage_errors(tmp_path):
    assert cli("frobnicate") == 2
    assert cli("weightmap", "--width", 36) == 2
    assert cli("weightmap", "--width", 36, "--height", 18) == 2
    assert cli("weightmap", "--width", 36, "--height", 18, "--config", tmp_path / "nope.toml", "--out", tmp_path / "w.bin") == 2
    assert cli("weightmap", "--width", 0, "--height", 18) == 2


def test_weightmap_is_cached_and_reproducible(tmp_path, capsys):
    cache = tmp_path / "cache"
    assert cli("weightmap", "--width", 36, "--height", 18, "--cache-dir", cache, "--out", tmp_path / "a.bin") == 0
    assert "cache miss" in capsys.readouterr().err
    assert cli("weightmap", "--width", 36, "--height", 18, "--cache-dir", cache, "--out", tmp_path / "b.bin") == 0
    assert "cache hit" in capsys.readouterr().err
    a, b = (tmp_path / "a.bin").read_bytes(), (tmp_path / "b.bin").read_bytes()
    assert a == b
    assert len(a) == 8 + 8 * 36 * 18


def test_weightmap_settings_from_toml(tmp_path):
    config = tmp_path / "ovq.toml"
    config.write_text(f'cache_dir = "{(tmp_path / "toml_cache").as_posix()}"\npool_step_deg = 2.0\n')
    assert cli("weightmap", "--width", 36, "--height", 18, "--config", config, "--out", tmp_path / "w.bin") == 0
    assert list((tmp_path / "toml_cache").glob("ncp_36x18_*.bin"))


def test_psnr_of_identical_sequences(tmp_path, videos):
    ref, _ = videos
    out = tmp_path / "psnr.csv"
    assert cli("metric", "--ref", ref, "--dist", ref, "--width", 128, "--height", 64, "--metric", "psnr", "--out", out) == 0
    assert report(out)["mean"] == 100.0
    assert pd.read_csv(out).frame_index.tolist() == ["0", "1", "2", "mean"]


def test_uniform_weights_reproduce_psnr(tmp_path, videos):
    ref, dist = videos
    save_weight_map(WeightMap.uniform(128, 64), tmp_path / "uniform.bin")
    common = ["--ref", ref, "--dist", dist, "--width", 128, "--height", 64, "--threads", 2]
    assert cli("metric", *common, "--metric", "psnr", "--out", tmp_path / "p.csv") == 0
    assert cli("metric", *common, "--metric", "ncp-psnr", "--weights", tmp_path / "uniform.bin", "--out", tmp_path / "n.csv") == 0
    plain, weighted = report(tmp_path / "p.csv"), report(tmp_path / "n.csv")
    assert weighted["mean"] == pytest.approx(plain["mean"], abs=1e-9)
    assert weighted["weight_map_id"] == str(tmp_path / "uniform.bin")
    assert [s["frame_index"] for s in weighted["scores"]] == [0, 1, 2]


def test_ncp_metric_uses_the_cache(tmp_path, videos):
    ref, dist = videos
    out = tmp_path / "ncp.csv"
    args = ["--ref", ref, "--dist", dist, "--width", 128, "--height", 64, "--cache-dir", tmp_path / "c"]
    assert cli("metric", *args, "--metric", "ncp-ssim", "--out", out) == 0
    assert 0.0 < report(out)["mean"] < 1.0
    assert list((tmp_path / "c").glob("ncp_128x64_*.bin"))


def test_cp_metric_without_model(tmp_path, videos):
    ref, dist = videos
    args = ["--ref", ref, "--dist", dist, "--width", 128, "--height", 64, "--metric", "cp-psnr"]
    assert cli("metric", *args, "--out", tmp_path / "cp.csv") == 2


def test_frame_count_mismatch(tmp_path, videos, make_frame, write_yuv):
    ref, _ = videos
    short = write_yuv(tmp_path / "short.yuv", [make_frame(128, 64)])
    args = ["--ref", ref, "--dist", short, "--width", 128, "--height", 64, "--metric", "psnr"]
    assert cli("metric", *args, "--out", tmp_path / "x.csv") == 1


def test_dmos_command(tmp_path, toy_score_files, capsys):
    scores, refs = toy_score_files
    out = tmp_path / "dmos.csv"
    assert cli("dmos", "--scores", scores, "--references", refs, "--out", out) == 0
    table = pd.read_csv(out)
    assert table.sequence_id.tolist() == ["A", "B", "C"]
    np.testing.assert_allclose(table.o_dmos, [100 / 3, 61.1111, 55.5556], atol=1e-3)
    assert set(table.front) == {"---"}
    assert "Wrote DMOS of 3 sequences" in capsys.readouterr().out


def _sequence_files(tmp_path, values, objective):
    dmos = tmp_path / "dmos.csv"
    dmos.write_text("sequence_id,o_dmos\n" + "".join(f"S{i},{v}\n" for i, v in enumerate(values)))
    obj = tmp_path / "metric.csv"
    obj.write_text("sequence_id,score\n" + "".join(f"S{i},{v}\n" for i, v in enumerate(objective)))
    return dmos, obj


def test_eval_command(tmp_path):
    q = np.linspace(20, 45, 8)
    dmos, obj = _sequence_files(tmp_path, 90 - 1.5 * q, q)
    out = tmp_path / "eval.json"
    assert cli("eval", "--objective", obj, "--dmos", dmos, "--out", out) == 0
    result = json.loads(out.read_text())
    assert result["metric"] == "metric"
    assert result["srcc"] == pytest.approx(1.0)

    table = tmp_path / "table.csv"
    assert cli("eval", "--objective", f"a={obj}", "--objective", f"b={obj}", "--dmos", dmos, "--table", table) == 0
    assert pd.read_csv(table).metric.tolist() == ["a", "b"]
    assert cli("eval", "--objective", f"a={obj}", "--objective", f"b={obj}", "--dmos", dmos, "--out", out) == 2


def _write_traces(path, rows, sample_rate=10):
    path.write_text(
        f"# sample_rate={sample_rate}\nsubject_id,sequence_id,sample_index,longitude_deg,latitude_deg\n"
        + "".join(",".join(str(x) for x in r) + "\n" for r in rows)
    )
    return path


def test_analyze_modes(tmp_path, capsys):
    rows = [(f"s{k}", "A", i, 10 * i - 40, 2 * i) for k in range(4) for i in range(9)]
    traces = _write_traces(tmp_path / "t.csv", rows)

    assert cli("analyze", "cc", "--traces", traces, "--traces-b", traces) == 0
    assert json.loads(capsys.readouterr().out)["cc"] == pytest.approx(1.0)

    assert cli("analyze", "corr", "--traces", traces) == 0
    assert json.loads(capsys.readouterr().out)["lonlat_pcc"] == pytest.approx(1.0)

    heat = tmp_path / "heat.pgm"
    assert cli("analyze", "heatmap", "--traces", traces, "--width", 72, "--height", 36, "--out", heat) == 0
    assert heat.read_bytes().startswith(b"P5")
    assert heat.with_suffix(".bin").stat().st_size == 8 + 8 * 72 * 36

    hist = tmp_path / "hist.csv"
    assert cli("analyze", "hist", "--traces", traces, "--bin", 10, "--out", hist) == 0
    assert pd.read_csv(hist).groupby("axis").frequency.sum().tolist() == pytest.approx([1.0, 1.0])
    capsys.readouterr()

    assert cli("analyze", "consistency", "--traces", traces, "--width", 72, "--height", 36, "--trials", 2) == 0
    assert json.loads(capsys.readouterr().out)["cc_mean"] == pytest.approx(1.0)

    assert cli("analyze", "heatmap", "--traces", traces) == 2
    assert cli("analyze", "regional") == 2


def test_analyze_regional(tmp_path, capsys, toy_score_files):
    scores, refs = toy_score_files
    traces = _write_traces(
        tmp_path / "t.csv",
        [(s, q, i, lon, 0) for s, lon in (("s1", 0), ("s2", 90), ("s3", 0)) for q in "ABC" for i in range(10, 20)],
    )
    dmos = tmp_path / "dmos.csv"
    assert cli("dmos", "--scores", scores, "--references", refs, "--traces", traces, "--out", dmos) == 0
    capsys.readouterr()
    assert cli("analyze", "regional", "--dmos", dmos) == 0
    result = json.loads(capsys.readouterr().out)["srcc"]
    assert result["back"] is None
    assert result["front"] is not None


@pytest.fixture
def small_viewport(monkeypatch):
    monkeypatch.setenv("OVQ_VIEWPORT_SIZE", "64")
    monkeypatch.setenv("OVQ_SALIENCY_POINTS", "2000")


@pytest.fixture
def dot_clips(tmp_path, small_viewport, dot_frame, write_yuv):
    """Manifest and traces for two 2-frame clips of two dots; viewers turn to the left dot."""
    frames = [dot_frame((0.0, 20.0))] * 2
    write_yuv(tmp_path / "r.yuv", frames)
    write_yuv(tmp_path / "a.yuv", frames)
    manifest = tmp_path / "manifest.csv"
    manifest.write_text(
        "sequence_id,path,width,height,frame_count,role,reference_id\n"
        "R,r.yuv,256,128,2,reference,\n"
        "A,a.yuv,256,128,2,impaired,R\n"
    )
    rows = [(s, q, i, 20 * i, 0) for s in ("s1", "s2") for q in "RA" for i in range(2)]
    traces = _write_traces(tmp_path / "t.csv", rows, sample_rate=25)
    return manifest, traces


@pytest.mark.slow
def test_train_then_predict(tmp_path, dot_clips):
    manifest, traces = dot_clips
    model_path = tmp_path / "model.json"

    args = ["--manifest", manifest, "--traces", traces, "--trees", 3, "--min-leaf", 1, "--out", model_path]
    assert cli("train", *args) == 0
    assert load_model(model_path).tree_count == 3

    out = tmp_path / "traj.csv"
    args = ["--video", tmp_path / "a.yuv", "--width", 256, "--height", 128, "--model", model_path, "--out", out]
    assert cli("predict", *args) == 0
    trajectory = pd.read_csv(out)
    assert trajectory.frame_index.tolist() == [0, 1]
    assert trajectory.longitude_deg.iloc[0] == 0.0


def test_metric_output_is_reproducible(tmp_path, videos):
    ref, dist = videos
    args = ["--ref", ref, "--dist", dist, "--width", 128, "--height", 64, "--metric", "ssim"]
    assert cli("metric", *args, "--out", tmp_path / "a.csv") == 0
    assert cli("metric", *args, "--threads", 3, "--out", tmp_path / "b.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@pytest.mark.slow
def test_train_is_reproducible(tmp_path, dot_clips):
    manifest, traces = dot_clips
    args = ["--manifest", manifest, "--traces", traces, "--trees", 4, "--min-leaf", 1, "--seed", 5]
    assert cli("train", *args, "--out", tmp_path / "a.json") == 0
    assert cli("train", *args, "--threads", 2, "--out", tmp_path / "b.json") == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_cp_metric_is_reproducible(tmp_path, videos, small_viewport):
    ref, dist = videos
    # Posterior 1 away from the viewport center, so the simulated viewer moves.
    tree = DecisionTreeModel(
        feature_index=[0, LEAF, LEAF],
        threshold=[0.15, 0.0, 0.0],
        left=[1, LEAF, LEAF],
        right=[2, LEAF, LEAF],
        leaf_posterior=[0.5, 0.0, 1.0],
    )
    save_model(ForestModel(tree_count=1, trees=[tree]), tmp_path / "model.json")
    args = ["--ref", ref, "--dist", dist, "--width", 128, "--height", 64, "--metric", "cp-psnr"]
    args += ["--model", tmp_path / "model.json", "--seed", 11, "--cache-dir", tmp_path / "cache"]
    assert cli("metric", *args, "--out", tmp_path / "a.csv") == 0
    assert cli("metric", *args, "--out", tmp_path / "b.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert report(tmp_path / "a.csv")["seed"] == 11
