# src/app.py

import argparse
import asyncio
import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd
from pydantic import ValidationError

from src.core.config import Settings, load_settings
from src.core.errors import ArgumentError, DimensionError, OmniVQAError
from src.core.logging_setup import setup_logging
from src.core.storage import ArtifactStore
from src.modules.evaluation.stats import compare_metrics, evaluate_metric, regional_srcc, write_eval_json
from src.modules.gaze.forest import train_forest
from src.modules.gaze.models import ExtractorConfig, ForestHyperParams
from src.modules.gaze.predictor import build_training_set, predict_trajectory, save_trajectory
from src.modules.jobs.worker import run_work_units, split_range
from src.modules.media.artifacts import load_model, load_weight_map, save_float_grid, save_model, write_pgm16
from src.modules.media.tables import load_gmm_params, load_manifest, load_scores, load_sequence_values, load_traces
from src.modules.media.yuv import YuvReader
from src.modules.quality.scorer import (
    METRICS,
    build_report,
    check_request,
    check_sequences,
    needs_model,
    needs_weights,
    score_frame_range,
    write_report_csv,
    write_report_json,
)
from src.modules.subjective.analysis import (
    direction_histograms,
    heatmap_cc,
    heatmap_from_traces,
    lonlat_correlation,
    split_half_dmos_srcc,
    split_half_heatmap_cc,
)
from src.modules.subjective.scores import (
    difference_scores,
    load_dmos,
    process_scores,
    reject_subjects,
    rescale,
    save_dmos,
    z_scores,
)
from src.modules.weights.gmm import DEFAULT_GMM
from src.modules.weights.weight_map import WeightMap, ncp_weight_map
from src.utils import format_duration

logger = logging.getLogger(__name__)

ANALYZE_MODES = ("corr", "heatmap", "cc", "hist", "consistency", "dmos-consistency", "regional")

FORMATS = """\
file formats:
  video       raw 8-bit I420 (Y plane, then U and V at half resolution), frames back to back
  traces      CSV subject_id,sequence_id,sample_index,longitude_deg,latitude_deg
              with an optional first line "# sample_rate=<hz>"
  scores      CSV subject_id,sequence_id,raw_score (0..100, references included)
  references  CSV sequence_id,reference_id (impaired sequence -> its reference)
  manifest    CSV sequence_id,path,width,height,frame_count,role,reference_id
  objective   CSV sequence_id,score
  dmos        CSV sequence_id,o_dmos,front,left,back,right,top,bottom ("---" = invalid region)
  weights     binary: uint32 width, uint32 height (little endian), then float64 row-major
  gmm         CSV axis,k,a,b,c with six rows (longitude/latitude, k = 1..3)
  model       JSON forest model (version 1)
  trajectory  CSV frame_index,longitude_deg,latitude_deg
"""


# --- Argument parsing ---


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file whose keys override the defaults")
    common.add_argument("--log-level", help="console log level (DEBUG, INFO, WARNING, ERROR)")
    common.add_argument("--threads", type=_positive_int, help="worker threads (env OVQ_THREADS)")
    common.add_argument("--seed", type=int, help="random seed (default 2018)")
    common.add_argument("--cache-dir", type=Path, help="weight-map cache directory")
    common.add_argument("--progress", action="store_true", default=None, help="show progress bars")

    parser = argparse.ArgumentParser(
        prog="python -m src",
        description="Quality assessment of omnidirectional (360 degree) video.",
        epilog=FORMATS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(
            name, parents=[common], help=help_text, epilog=FORMATS, formatter_class=argparse.RawDescriptionHelpFormatter
        )

    p = add("weightmap", "build (or reuse) the NCP weight map for a frame size")
    p.add_argument("--width", type=_positive_int, required=True)
    p.add_argument("--height", type=_positive_int, required=True)
    p.add_argument("--gmm", type=Path, help="GMM parameter override CSV")
    p.add_argument("--out", type=Path, required=True, help="where to write the map")
    p.set_defaults(handler=cmd_weightmap)

    p = add("metric", "score an impaired sequence against its reference")
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--dist", type=Path, required=True)
    p.add_argument("--width", type=_positive_int, required=True)
    p.add_argument("--height", type=_positive_int, required=True)
    p.add_argument("--metric", choices=METRICS, required=True)
    p.add_argument("--weights", type=Path, help="weight map file (default: cached NCP map)")
    p.add_argument("--gmm", type=Path, help="GMM parameter override CSV for the cached map")
    p.add_argument("--model", type=Path, help="forest model JSON (cp-* metrics)")
    p.add_argument("--sequence-id", help="sequence id recorded in the report (default: file stem)")
    p.add_argument("--out", type=Path, required=True, help="report CSV; the JSON report goes next to it")
    p.set_defaults(handler=cmd_metric)

    p = add("train", "train the viewing-direction forest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--traces", type=Path, required=True)
    p.add_argument("--sample-rate", type=float, help="trace sample rate when the file has no header")
    p.add_argument("--trees", type=_positive_int)
    p.add_argument("--depth", type=_positive_int)
    p.add_argument("--min-leaf", type=_positive_int)
    p.add_argument("--fps", type=float)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_train)

    p = add("predict", "predict a viewing trajectory for one sequence")
    p.add_argument("--video", type=Path, required=True)
    p.add_argument("--width", type=_positive_int, required=True)
    p.add_argument("--height", type=_positive_int, required=True)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--sequence-id")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_predict)

    p = add("dmos", "turn raw scores into O-DMOS and V-DMOS")
    p.add_argument("--scores", type=Path, required=True)
    p.add_argument("--references", type=Path, required=True)
    p.add_argument("--traces", type=Path, help="head-movement traces (enables V-DMOS)")
    p.add_argument("--sample-rate", type=float)
    p.add_argument("--f0", type=float)
    p.add_argument("--scope", choices=("sequence", "panel"))
    p.add_argument("--discard-seconds", type=float)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=cmd_dmos)

    p = add("eval", "evaluate objective scores against DMOS")
    p.add_argument(
        "--objective", action="append", required=True, metavar="[NAME=]PATH", help="objective CSV; repeat to compare"
    )
    p.add_argument("--dmos", type=Path, required=True)
    p.add_argument("--out", type=Path, help="evaluation JSON (single objective)")
    p.add_argument("--table", type=Path, help="comparison CSV over every objective")
    p.set_defaults(handler=cmd_eval)

    p = add("analyze", "statistics of traces and scores")
    p.add_argument("mode", choices=ANALYZE_MODES)
    p.add_argument("--traces", type=Path)
    p.add_argument("--traces-b", type=Path, help="second trace file (cc)")
    p.add_argument("--sample-rate", type=float)
    p.add_argument("--scores", type=Path)
    p.add_argument("--references", type=Path)
    p.add_argument("--dmos", type=Path)
    p.add_argument("--width", type=_positive_int, default=360)
    p.add_argument("--height", type=_positive_int, default=180)
    p.add_argument("--sigma", type=float, help="heat-map Gaussian sigma in degrees")
    p.add_argument("--sequence", help="restrict heat maps to one sequence")
    p.add_argument("--bin", type=float, default=1.0, help="histogram bin width in degrees")
    p.add_argument("--trials", type=_positive_int, default=10)
    p.add_argument("--out", type=Path)
    p.set_defaults(handler=cmd_analyze)

    return parser


def settings_from_args(args: argparse.Namespace) -> Settings:
    if args.config is not None and not args.config.is_file():
        raise ArgumentError(f"Config file {args.config} not found")
    overrides: Dict[str, Any] = {
        "console_log_level": args.log_level,
        "threads": args.threads,
        "seed": args.seed,
        "cache_dir": args.cache_dir,
        "show_progress": args.progress,
        "trees": getattr(args, "trees", None),
        "max_depth": getattr(args, "depth", None),
        "min_leaf": getattr(args, "min_leaf", None),
        "fps": getattr(args, "fps", None),
        "f0": getattr(args, "f0", None),
        "rejection_scope": getattr(args, "scope", None),
        "discard_seconds": getattr(args, "discard_seconds", None),
        "heatmap_sigma_deg": getattr(args, "sigma", None),
    }
    try:
        return load_settings(args.config, **overrides)
    except ValidationError as e:
        err = e.errors()[0]
        where = ".".join(str(x) for x in err["loc"]) or "settings"
        raise ArgumentError(f"Invalid setting {where}: {err['msg']}") from e


def _emit(payload: Dict[str, Any], out: Optional[Path]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if out is not None:
        Path(out).write_text(text + "\n", encoding="utf-8")


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = ["--" + n.replace("_", "-") for n in names if getattr(args, n, None) is None]
    if missing:
        raise ArgumentError(f"{args.command} {args.mode} needs {', '.join(missing)}")


# --- Subcommands ---


async def resolve_weights(
    args: argparse.Namespace, settings: Settings, store: ArtifactStore, width: int, height: int
) -> WeightMap:
    """Weight map from --weights, or the cached NCP map for the frame size."""
    if getattr(args, "weights", None) is not None:
        wmap = load_weight_map(args.weights)
    else:
        params = load_gmm_params(args.gmm) if getattr(args, "gmm", None) else DEFAULT_GMM
        wmap = await asyncio.to_thread(
            store.get_weight_map,
            width,
            height,
            lambda: ncp_weight_map(
                width, height, params, settings.pool_step_deg, settings.viewport_half_fov, settings.show_progress
            ),
            params,
            settings.pool_step_deg,
            settings.viewport_half_fov,
        )
    if (wmap.width, wmap.height) != (width, height):
        raise DimensionError((width, height), (wmap.width, wmap.height))
    return wmap


async def cmd_weightmap(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> int:
    wmap = await resolve_weights(args, settings, store, args.width, args.height)
    store.store_weight_map(wmap, args.out)
    print(f"{wmap.width}x{wmap.height} NCP weight map {wmap.source_id}")
    return 0


async def cmd_metric(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> int:
    if needs_model(args.metric) and args.model is None:
        raise ArgumentError(f"{args.metric} needs a trained model (--model)")
    json_out = args.out.with_suffix(".json")
    if json_out == args.out:
        raise ArgumentError("--out names the CSV report; the JSON report is written next to it")

    model = load_model(args.model) if needs_model(args.metric) else None
    weights = await resolve_weights(args, settings, store, args.width, args.height) if needs_weights(args.metric) else None
    check_request(args.metric, weights, model)
    sequence_id = args.sequence_id or args.dist.stem
    config = ExtractorConfig.from_settings(settings)

    with YuvReader(args.ref, args.width, args.height) as ref, YuvReader(args.dist, args.width, args.height) as dist:
        count = check_sequences(ref, dist)
        trajectory = None
        if model is not None:
            trajectory = await asyncio.to_thread(
                predict_trajectory, dist, model, settings.seed, config, sequence_id, settings.show_progress
            )

    def score_chunk(bounds: Tuple[int, int]):
        # One reader pair per work unit; file handles are not shared across threads.
        with YuvReader(args.ref, args.width, args.height) as r, YuvReader(args.dist, args.width, args.height) as d:
            return score_frame_range(
                args.metric, r, d, *bounds, weights, trajectory, settings.viewport_half_fov, settings.psnr_cap_db
            )

    start = time.monotonic()
    chunks = await run_work_units(
        split_range(count, settings.threads), score_chunk, settings.threads, "Scoring", settings.show_progress
    )
    scores = [s for chunk in chunks for s in chunk]
    report = build_report(args.metric, scores, sequence_id, weights, model, settings.seed)
    logger.info(f"Scored {count} frames with {args.metric} in {format_duration(time.monotonic() - start)}")

    write_report_csv(report, args.out)
    write_report_json(report, json_out)
    print(f"{args.metric} {sequence_id}: mean {report.mean:.6f} over {count} frames")
    return 0


async def cmd_train(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> int:
    manifest = load_manifest(args.manifest)
    traces = load_traces(args.traces, args.sample_rate)
    training = await build_training_set(
        manifest,
        traces,
        settings.seed,
        ExtractorConfig.from_settings(settings),
        settings.fps,
        settings.threads,
        settings.show_progress,
    )
    pairs = len(traces.subjects) * len(manifest.sequences)
    hyper = ForestHyperParams(
        trees=settings.trees,
        max_depth=settings.max_depth,
        min_leaf=settings.min_leaf,
        features_per_split=settings.features_per_split,
        seed=settings.seed,
    )
    model = await asyncio.to_thread(train_forest, training.features, training.labels, hyper)
    save_model(model, args.out)

    negatives = training.rows - training.positives
    print(
        f"Trained {model.tree_count} trees on {training.rows} rows from {pairs} subject/sequence pairs: "
        f"{training.positives} positive, {negatives} negative ({training.positives / training.rows:.1%} positive)"
    )
    return 0


async def cmd_predict(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> int:
    model = load_model(args.model)
    sequence_id = args.sequence_id or args.video.stem
    with YuvReader(args.video, args.width, args.height) as video:
        trajectory = await asyncio.to_thread(
            predict_trajectory,
            video,
            model,
            settings.seed,
            ExtractorConfig.from_settings(settings),
            sequence_id,
            settings.show_progress,
        )
    save_trajectory(trajectory, args.out)
    print(f"Wrote {len(trajectory)} directions for {sequence_id} to {args.out}")
    return 0


async def cmd_dmos(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> int:
    scores = load_scores(args.scores, args.references)
    traces = load_traces(args.traces, args.sample_rate) if args.traces is not None else None
    z, _, vectors = process_scores(scores, traces, settings.f0, settings.rejection_scope, settings.discard_seconds)
    save_dmos(vectors, args.out)
    for subject in z.rejected_subjects:
        print(f"Rejected {subject}: {z.reasons[subject]}")
    print(f"Wrote DMOS of {len(vectors)} sequences to {args.out}")
    return 0


def _objective_arg(text: str) -> Tuple[str, Path]:
    name, sep, path = text.partition("=")
    if not sep:
        return Path(text).stem, Path(text)
    if not name or not path:
        raise ArgumentError(f"--objective {text!r} is not NAME=PATH")
    return name, Path(path)


async def cmd_eval(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> int:
    if args.out is None and args.table is None:
        raise ArgumentError("eval needs --out or --table")
    named = [_objective_arg(t) for t in args.objective]
    names = [n for n, _ in named]
    if len(set(names)) != len(names):
        raise ArgumentError(f"Objective names repeat: {names}")
    if args.out is not None and len(named) != 1:
        raise ArgumentError("--out takes exactly one --objective; use --table to compare several")

    dmos = load_sequence_values(args.dmos, "o_dmos")
    objectives = {name: load_sequence_values(path, "score") for name, path in named}
    if args.out is not None:
        name = names[0]
        result = evaluate_metric(objectives[name], dmos)
        write_eval_json(result, args.out, metric=name)
        print(f"{name}: SRCC {result.srcc:.4f}  PCC {result.pcc:.4f}  RMSE {result.rmse:.4f}  MAE {result.mae:.4f}")
    if args.table is not None:
        table = compare_metrics(objectives, dmos)
        table.to_csv(args.table, index=False, lineterminator="\n")
        print(table.to_string(index=False))
    return 0


async def cmd_analyze(args: argparse.Namespace, settings: Settings, store: ArtifactStore) -> int:
    mode = args.mode
    sigma = settings.heatmap_sigma_deg

    if mode in ("corr", "heatmap", "cc", "hist", "consistency"):
        _require(args, "traces")
        traces = load_traces(args.traces, args.sample_rate)

    if mode == "corr":
        _emit({"mode": mode, "lonlat_pcc": lonlat_correlation(traces)}, args.out)
    elif mode == "heatmap":
        _require(args, "out")
        heat = heatmap_from_traces(traces, args.width, args.height, sigma, args.sequence)
        write_pgm16(heat.density, args.out)
        save_float_grid(heat.density, args.out.with_suffix(".bin"))
        print(f"Wrote {args.width}x{args.height} heat map to {args.out}")
    elif mode == "cc":
        _require(args, "traces_b")
        other = load_traces(args.traces_b, args.sample_rate)
        a = heatmap_from_traces(traces, args.width, args.height, sigma, args.sequence)
        b = heatmap_from_traces(other, args.width, args.height, sigma, args.sequence)
        _emit({"mode": mode, "cc": heatmap_cc(a, b)}, args.out)
    elif mode == "hist":
        _require(args, "out")
        lon, lat = direction_histograms(traces, args.bin)
        rows: List[pd.DataFrame] = [
            pd.DataFrame({"axis": "longitude", "center_deg": lon["longitude_deg"], "frequency": lon["frequency"]}),
            pd.DataFrame({"axis": "latitude", "center_deg": lat["latitude_deg"], "frequency": lat["frequency"]}),
        ]
        pd.concat(rows, ignore_index=True).to_csv(args.out, index=False, lineterminator="\n")
        print(f"Wrote {len(lon)} longitude and {len(lat)} latitude bins to {args.out}")
    elif mode == "consistency":
        mean, std = split_half_heatmap_cc(
            traces, args.width, args.height, sigma, args.trials, settings.seed, args.sequence
        )
        _emit({"mode": mode, "cc_mean": mean, "cc_std": std, "trials": args.trials}, args.out)
    elif mode == "dmos-consistency":
        _require(args, "scores", "references")
        scores = load_scores(args.scores, args.references)
        z = reject_subjects(z_scores(difference_scores(scores)), settings.rejection_scope)
        value = split_half_dmos_srcc(rescale(z), args.trials, settings.seed)
        _emit({"mode": mode, "srcc_mean": value, "trials": args.trials}, args.out)
    elif mode == "regional":
        _require(args, "dmos")
        _emit({"mode": mode, "srcc": regional_srcc(load_dmos(args.dmos))}, args.out)
    return 0


# --- Entry point ---


async def run(argv: Optional[List[str]] = None) -> int:
    """Parses argv, runs one subcommand and returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 after --help.
        return int(e.code or 0)

    try:
        settings = settings_from_args(args)
    except OmniVQAError as e:
        logger.error(str(e))
        return e.exit_code

    setup_logging(settings)
    start = time.monotonic()
    logger.info(f"Running {args.command}...")
    store = ArtifactStore(settings.cache_dir)
    try:
        store.init_store()
        status = await args.handler(args, settings, store)
    except OmniVQAError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except Exception as e:
        logger.error(f"{args.command} failed unexpectedly: {e}", exc_info=True)
        return 1
    logger.info(f"{args.command} finished in {format_duration(time.monotonic() - start)}")
    return status
