"""Command-line surface: gen | prescan | run | eval | export-heatmap | bench."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import background, scenegen
from .compliance import HandEvent
from .config import ConfigError, PipelineConfig
from .frames import read_sequence_file, write_sequence_file


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        config = PipelineConfig.from_json_file(args.config)
    else:
        config = PipelineConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def _require(args, names: list[str]) -> None:
    missing = [n for n in names if getattr(args, n.replace("-", "_"), None) is None]
    if missing:
        raise ConfigError(f"missing required argument(s): {', '.join('--' + n for n in missing)}")


def _model_from_args(args, config: PipelineConfig):
    if args.model:
        return background.load_model_file(args.model)
    if args.prescan:
        _, frames = read_sequence_file(args.prescan)
        return background.build_model(frames, config.voxel_size_m, config.fine_radius_m)
    raise ConfigError("a background model is required: pass --model or --prescan")


def _truth_path(out: str) -> Path:
    p = Path(out)
    return p.with_suffix(".truth.json")


def cmd_gen(args) -> int:
    config = _load_config(args)
    seed = config.seed
    rig = scenegen.BathRig()
    if args.clumped_gap is not None:
        spec = scenegen.clumped_pair_spec(
            seed, surface_gap=args.clumped_gap, frame_count=args.frames, rig=rig
        )
    else:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
        poses = scenegen.place_knives(args.knives, rig, rng, args.min_separation)
        spec = scenegen.ScenarioSpec(
            knives=poses,
            frame_count=args.frames,
            noise_sigma=args.noise_sigma,
            dropout=args.dropout,
            seed=seed,
            hand_intrusions=tuple(args.hand or ()),
            rig=rig,
        )
    frames, gt = scenegen.generate_sequence(spec)
    write_sequence_file(args.out, frames, rig.intrinsics)
    truth_path = args.truth or _truth_path(args.out)
    scenegen.write_ground_truth(gt, truth_path)
    print(f"wrote {len(frames)} frames to {args.out}, ground truth to {truth_path}")
    return 0


def cmd_prescan(args) -> int:
    config = _load_config(args)
    voxel = args.voxel if args.voxel is not None else config.voxel_size_m
    radius = args.radius if args.radius is not None else config.fine_radius_m
    _, frames = read_sequence_file(args.input)
    model = background.build_model(frames, voxel, radius)
    background.save_model_file(args.out, model)
    print(f"model: {len(model.points)} background points, "
          f"{len(model.occupied)} occupied voxels -> {args.out}")
    return 0


def _hand_events(args) -> list[HandEvent]:
    from .pipeline import hand_events_from_intervals

    if getattr(args, "hands", None):
        events = []
        with open(args.hands, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                events.append(HandEvent(float(obj["t"]), bool(obj["present"])))
        return events
    if getattr(args, "truth", None):
        gt = scenegen.read_ground_truth(args.truth)
        return hand_events_from_intervals(gt.hand_intervals)
    return []


def cmd_run(args) -> int:
    from .pipeline import run_pipeline

    config = _load_config(args)
    if args.print_config:
        print(config.to_json())
        return 0
    _require(args, ["in", "log"])
    header, frames = read_sequence_file(args.input)
    model = _model_from_args(args, config)
    events = _hand_events(args)

    with open(args.log, "w", encoding="utf-8") as sink:
        meta = {
            "event": "run_meta",
            "intrinsics": {
                "fx": header.intrinsics.fx, "fy": header.intrinsics.fy,
                "cx": header.intrinsics.cx, "cy": header.intrinsics.cy,
                "width": header.intrinsics.width, "height": header.intrinsics.height,
            },
            "config": config.to_flat(),
        }
        sink.write(json.dumps(meta, separators=(",", ":")) + "\n")
        result = run_pipeline(frames, header.intrinsics, model, config, events, sink)

    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(result.report, fh, indent=2)
    print(f"processed {len(frames)} frames -> {args.log}"
          + (f", report -> {args.report}" if args.report else ""))
    return 0 if result.ok else 1


def _read_log(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def cmd_eval(args) -> int:
    from .frames import CameraIntrinsics
    from .pipeline import evaluate_log

    config = _load_config(args)
    records = _read_log(args.log)
    gt = scenegen.read_ground_truth(args.truth)

    meta = next((r for r in records if r.get("event") == "run_meta"), None)
    if args.input:
        header, _ = read_sequence_file(args.input)
        intrinsics = header.intrinsics
    elif meta:
        intrinsics = CameraIntrinsics(**meta["intrinsics"])
    else:
        raise ConfigError("need --in (sequence) or a run_meta log line for intrinsics")

    result = evaluate_log(
        records, gt, intrinsics,
        warmup_frames=config.warmup_frames,
        match_gate_px=config.match_gate_px,
    )
    summary = {k: result[k] for k in
               ("frames_evaluated", "n_objects", "mae", "rmse", "nrmse", "id_switches")}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    if args.csv:
        from . import report

        report.write_counts_csv(args.csv, result)
    if args.figure:
        from . import report

        report.save_counts_figure(args.figure, result)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_export_heatmap(args) -> int:
    from .density import heatmap, write_pgm
    from .pipeline import density_cloud_at_frame

    config = _load_config(args)
    header, frames = read_sequence_file(args.input)
    model = _model_from_args(args, config)
    cloud = density_cloud_at_frame(frames, model, config, args.frame)
    image = heatmap(cloud, header.intrinsics)
    with open(args.out, "wb") as fh:
        write_pgm(image, fh)
    if args.png:
        from . import report

        report.save_heatmap_png(args.png, image)
    print(f"heatmap of frame {args.frame} ({len(cloud)} points) -> {args.out}")
    return 0


def cmd_bench(args) -> int:
    from .pipeline import bench

    config = _load_config(args)
    header, frames = read_sequence_file(args.input)
    model = _model_from_args(args, config)
    stats = bench(frames, header.intrinsics, model, config)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2)
    if args.csv:
        from . import report

        report.write_bench_csv(args.csv, stats)
    if args.figure:
        from . import report

        report.save_bench_figure(args.figure, stats)
    print(f"median end-to-end {stats['end_to_end']['median_ms']:.2f} ms "
          f"over {stats['frames']} frames -> {args.out}")
    return 0


def _interval(text: str) -> tuple[float, float]:
    try:
        t0, t1 = text.split(":")
        return float(t0), float(t1)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected t0:t1, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toftrack",
        description="Depth-only object counting, tracking, and dwell compliance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="pipeline config JSON (flat module.key names)")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("gen", help="generate a synthetic scenario sequence")
    common(p)
    p.add_argument("--knives", type=int, default=0)
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="ground-truth JSON path (default: <out>.truth.json)")
    p.add_argument("--noise-sigma", type=float, default=0.002)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--hand", action="append", type=_interval, metavar="T0:T1",
                   help="hand intrusion interval, repeatable")
    p.add_argument("--min-separation", type=float, default=0.04)
    p.add_argument("--clumped-gap", type=float,
                   help="generate two handles with this surface gap instead")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("prescan", help="build a background model from an empty-bath sequence")
    common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--voxel", type=float, help="voxel size override (m)")
    p.add_argument("--radius", type=float, help="fine radius override (m)")
    p.set_defaults(func=cmd_prescan)

    p = sub.add_parser("run", help="run the detection/tracking/compliance pipeline")
    common(p)
    p.add_argument("--in", dest="input")
    p.add_argument("--model", help="background model file")
    p.add_argument("--prescan", help="empty-bath sequence to build the model from")
    p.add_argument("--log", help="ND-JSON event log output")
    p.add_argument("--report", help="final compliance report JSON")
    p.add_argument("--truth", help="ground-truth JSON supplying hand events")
    p.add_argument("--hands", help="ND-JSON hand event stream ({\"t\":..,\"present\":..})")
    p.add_argument("--print-config", action="store_true",
                   help="print the effective config and exit")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="evaluate a run log against ground truth")
    common(p)
    p.add_argument("--log", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True, help="metrics JSON output")
    p.add_argument("--in", dest="input", help="sequence file (intrinsics fallback)")
    p.add_argument("--csv", help="per-frame counts CSV")
    p.add_argument("--figure", help="counts-over-time figure PNG")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-heatmap", help="export a density heatmap image")
    common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--model")
    p.add_argument("--prescan")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--out", required=True, help="PGM (P5) output path")
    p.add_argument("--png", help="additional colormapped PNG path")
    p.set_defaults(func=cmd_export_heatmap)

    p = sub.add_parser("bench", help="measure per-stage and end-to-end latency")
    common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--model")
    p.add_argument("--prescan")
    p.add_argument("--out", required=True, help="latency statistics JSON")
    p.add_argument("--csv", help="per-stage CSV")
    p.add_argument("--figure", help="per-stage latency figure PNG")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
