"""Command-line interface: generate, detect, synth, eval, bench.

Configuration precedence: built-in defaults, then the JSON config file, then
command-line flags. Unknown config keys are rejected. Exit codes: 0 success,
1 partial failure (some inputs failed), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import evaluation, imgio, synth, taggen
from .codec import build_signature_table, builtin_family, filter_family, load_code_file
from .detector import ChromaTagDetector, DetectorParams, FrameResult
from .evaluation import GroundTruth, Metrics

DETECTIONS_SCHEMA = "chromatag.detections.v1"
MANIFEST_SCHEMA = "chromatag.manifest.v1"
SIDECAR_SCHEMA = "chromatag.tag_truth.v1"

_DETECTOR_KEYS = {f.name for f in dataclass_fields(DetectorParams)}
_PRESET_KEYS = {"gains", "bias", "blur_sigma", "noise_sigma", "bayer"}
_SWEEP_KEYS = {"sizes", "angles", "presets", "ids_per_cell", "px_per_cell"}
_TOP_KEYS = {"detector", "palette", "family_file", "sweep", "seed", "output_dir"}
_PALETTE_KEYS = {"red0", "red1", "green0", "green1", "black", "white"}


class ConfigError(ValueError):
    pass


def _check_keys(mapping: dict, allowed: set, where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys in {where}: {sorted(unknown)}")


def load_config(path: str | Path | None) -> dict:
    """Load and validate a run config; returns {} when no file is given."""
    if path is None:
        return {}
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(data, _TOP_KEYS, "config root")
    _check_keys(data.get("detector", {}), _DETECTOR_KEYS, "detector")
    _check_keys(data.get("palette", {}), _PALETTE_KEYS, "palette")
    sweep = data.get("sweep", {})
    _check_keys(sweep, _SWEEP_KEYS, "sweep")
    for name, preset in sweep.get("presets", {}).items():
        _check_keys(preset, _PRESET_KEYS, f"preset {name!r}")
    return data


def _detector_params(config: dict, args: argparse.Namespace) -> DetectorParams:
    params = DetectorParams()
    for key, value in config.get("detector", {}).items():
        setattr(params, key, type(getattr(params, key))(value))
    for key in _DETECTOR_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            setattr(params, key, value)
    params.validate()
    return params


def _palette(config: dict) -> taggen.TagPalette:
    section = config.get("palette")
    if not section:
        return taggen.DEFAULT_PALETTE
    kwargs = {k: tuple(int(c) for c in v) for k, v in section.items()}
    merged = {f.name: getattr(taggen.DEFAULT_PALETTE, f.name)
              for f in dataclass_fields(taggen.TagPalette)}
    merged.update(kwargs)
    return taggen.TagPalette(**merged)


def _family(config: dict):
    path = config.get("family_file")
    if path:
        return filter_family(load_code_file(path), name=Path(path).stem)
    return builtin_family()


def _presets(config: dict) -> dict[str, synth.PhotometricPreset]:
    presets = dict(synth.DEFAULT_PRESETS)
    for name, spec in config.get("sweep", {}).get("presets", {}).items():
        base = presets.get(name, synth.PhotometricPreset(name))
        presets[name] = synth.PhotometricPreset(
            name=name,
            gains=tuple(spec.get("gains", base.gains)),
            bias=float(spec.get("bias", base.bias)),
            blur_sigma=float(spec.get("blur_sigma", base.blur_sigma)),
            noise_sigma=float(spec.get("noise_sigma", base.noise_sigma)),
            bayer=bool(spec.get("bayer", base.bayer)),
        )
    return presets


def _add_detector_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("detector parameters")
    g.add_argument("--step", type=int, help="grid stride in pixels")
    g.add_argument("--a-diff-thresh", dest="a_diff_thresh", type=int)
    g.add_argument("--border-run", dest="border_run", type=int)
    g.add_argument("--border-thresh", dest="border_thresh", type=int)
    g.add_argument("--conv-thresh", dest="conv_thresh", type=float)
    g.add_argument("--max-center-iters", dest="max_center_iters", type=int)
    g.add_argument("--max-polygon-scans", dest="max_polygon_scans", type=int)
    g.add_argument("--patch-scale", dest="patch_scale", type=float)
    g.add_argument("--min-decode-contrast", dest="min_decode_contrast", type=int)
    g.add_argument("--no-lut", dest="use_lut", action="store_false", default=None)


def _detection_record(path: str, result: FrameResult) -> dict:
    return {
        "schema": DETECTIONS_SCHEMA,
        "path": path,
        "detections": [
            {
                "id": det.id,
                "rotation": det.rotation,
                "corners": [[float(x), float(y)] for x, y in det.quad],
                "center": [float(det.center[0]), float(det.center[1])],
            }
            for det in result.detections
        ],
        "seeds": result.seeds,
        "stage_times_us": {k: round(v, 1) for k, v in result.stage_times_us.items()},
        "stage_failures": dict(result.stage_failures),
    }


# ----------------------------------------------------------------------
# subcommands

def cmd_generate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    family = _family(config)
    palette = _palette(config)
    try:
        image, corners = taggen.render_tag(family, args.id, args.rotation,
                                           args.px_per_cell, palette)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.output)
    imgio.write_image(out, image)
    sidecar = out.with_suffix(out.suffix + ".json")
    sidecar.write_text(json.dumps({
        "schema": SIDECAR_SCHEMA,
        "id": args.id,
        "rotation": args.rotation,
        "px_per_cell": args.px_per_cell,
        "corners": [[float(x), float(y)] for x, y in corners],
    }, indent=2) + "\n")
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    params = _detector_params(config, args)
    family = _family(config)
    detector = ChromaTagDetector(build_signature_table(family), params)
    out = open(args.output, "w") if args.output else sys.stdout
    had_errors = False
    try:
        for path in args.images:
            try:
                image = imgio.read_image(path)
                result = detector.detect(image)
                record = _detection_record(str(path), result)
            except Exception as exc:  # unreadable file or malformed image
                record = {"schema": DETECTIONS_SCHEMA, "path": str(path),
                          "error": str(exc)}
                had_errors = True
            out.write(json.dumps(record) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 1 if had_errors else 0


def cmd_synth(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    family = _family(config)
    palette = _palette(config)
    presets = _presets(config)
    sweep_cfg = config.get("sweep", {})

    if args.backgrounds:
        paths = imgio.list_images(args.backgrounds)
        if not paths:
            print(f"error: no images in {args.backgrounds}", file=sys.stderr)
            return 2
        backgrounds = [imgio.read_image(p) for p in paths]
    else:
        backgrounds = imgio.builtin_backgrounds()

    preset_names = args.presets or sweep_cfg.get("presets", {}).keys() or ["wb", "nwb"]
    try:
        chosen = tuple(presets[name] for name in preset_names)
    except KeyError as exc:
        print(f"error: unknown preset {exc}", file=sys.stderr)
        return 2
    spec = synth.SweepSpec(
        sizes=tuple(args.sizes or sweep_cfg.get("sizes", synth.SweepSpec.sizes)),
        angles=tuple(args.angles or sweep_cfg.get("angles", synth.SweepSpec.angles)),
        presets=chosen,
        ids_per_cell=args.ids_per_cell or int(sweep_cfg.get("ids_per_cell", 1)),
        px_per_cell=int(sweep_cfg.get("px_per_cell", 32)),
        palette=palette,
    )
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    frames, records = synth.generate_sweep(spec, family, backgrounds, seed=seed)
    with open(out_dir / "manifest.jsonl", "w") as mf:
        for frame, record in zip(frames, records):
            imgio.write_image(out_dir / record["path"], frame.image)
            mf.write(json.dumps({"schema": MANIFEST_SCHEMA, **record}) + "\n")
    print(f"wrote {len(frames)} frames to {out_dir}")
    return 0


def _read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def cmd_eval(args: argparse.Namespace) -> int:
    detections = _read_jsonl(args.detections)
    manifest = _read_jsonl(args.manifest)
    det_by_path = {rec["path"]: rec for rec in detections}
    man_by_path: dict[str, list[dict]] = {}
    for rec in manifest:
        man_by_path.setdefault(rec["path"], []).append(rec)

    det_paths = {Path(p).name for p in det_by_path}
    man_paths = {Path(p).name for p in man_by_path}
    if det_paths != man_paths:
        print("error: detections and manifest cover different frame sets",
              file=sys.stderr)
        return 2

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    class _Det:
        __slots__ = ("id", "quad")

        def __init__(self, rec):
            self.id = int(rec["id"])
            self.quad = np.asarray(rec["corners"], dtype=np.float64)

    overall = Metrics()
    per_preset: dict[str, Metrics] = {}
    frame_metrics = []
    matched_det_quads = []
    matched_gt_quads = []
    records_list: list[dict] = []
    for det_path, drec in det_by_path.items():
        grecs = man_by_path[Path(det_path).name]
        dets = [_Det(d) for d in drec.get("detections", [])]
        gts = [GroundTruth.from_record(g) for g in grecs]
        m, matches = evaluation.match_frame(dets, gts, iou_thresh=args.iou_thresh)
        overall.add(m)
        preset = grecs[0].get("preset", "unknown")
        per_preset.setdefault(preset, Metrics()).add(m)
        frame_metrics.append((grecs[0], m))
        for di, gi, _ in matches:
            matched_det_quads.append(dets[di].quad)
            matched_gt_quads.append(gts[gi].quad)
        records_list.append({
            "stage_times_us": drec.get("stage_times_us", {}),
            "stage_failures": drec.get("stage_failures", {}),
            "n_detections": len(dets),
        })

    rows = [("all", overall)] + sorted(per_preset.items())
    evaluation.write_metrics_csv(out_dir / "metrics.csv", rows)

    size_edges = np.asarray(args.size_edges, dtype=float)
    angle_edges = np.asarray(args.angle_edges, dtype=float)
    evaluation.write_binned_recall_csv(
        out_dir / "recall_by_size.csv",
        evaluation.bin_recall(frame_metrics, "tag_size", size_edges))
    evaluation.write_binned_recall_csv(
        out_dir / "recall_by_angle.csv",
        evaluation.bin_recall(frame_metrics, "viewing_angle", angle_edges))
    evaluation.write_binned_recall_csv(
        out_dir / "recall_joint.csv",
        evaluation.bin_recall(frame_metrics, "joint", size_edges, angle_edges))

    radii = [float(r) for r in args.radii]
    cdf = evaluation.corner_error_cdf(matched_det_quads, matched_gt_quads, radii)
    evaluation.write_corner_cdf_csv(out_dir / "corner_cdf.csv", cdf,
                                    4 * len(matched_det_quads))

    if not args.no_histogram:
        frames_dir = Path(args.frames_dir) if args.frames_dir else Path(args.manifest).parent
        images = []
        masks = []
        for rec in manifest:
            images.append(imgio.read_image(frames_dir / Path(rec["path"]).name))
            masks.append(np.asarray(rec["corners"], dtype=np.float64))
        hist = evaluation.adiff_histogram(images, masks, step=args.step or 4)
        evaluation.write_histogram_csv(out_dir / "adiff_histogram.csv", hist)

    evaluation.write_timing_csv(out_dir / "timing.csv",
                                evaluation.timing_report(records_list))
    print(f"wrote reports to {out_dir}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    if args.repeats < 1:
        print("error: --repeats must be >= 1", file=sys.stderr)
        return 2
    config = load_config(args.config)
    params = _detector_params(config, args)
    family = _family(config)
    detector = ChromaTagDetector(build_signature_table(family), params)
    paths = imgio.list_images(args.images_dir)
    if not paths:
        print(f"error: no images in {args.images_dir}", file=sys.stderr)
        return 2
    images = [imgio.read_image(p) for p in paths]

    for image in images:  # warm-up pass excluded from the statistics
        detector.detect(image)

    records = []
    wall_ms = []
    for _ in range(args.repeats):
        for image in images:
            t0 = time.perf_counter()
            result = detector.detect(image)
            wall_ms.append((time.perf_counter() - t0) * 1e3)
            records.append({
                "stage_times_us": result.stage_times_us,
                "stage_failures": result.stage_failures,
                "n_detections": len(result.detections),
            })
    report = evaluation.timing_report(records)

    print(f"frames: {report.n_frames} ({report.n_detect_frames} with detections), "
          f"repeats: {args.repeats}")
    print(f"frame time: median {np.median(wall_ms):.3f} ms, mean {np.mean(wall_ms):.3f} ms")
    for label, fps in (("all", report.fps_total), (">0 detections", report.fps_detect),
                       ("0 detections", report.fps_empty)):
        print(f"fps [{label}]: {fps:.1f}" if fps else f"fps [{label}]: n/a")
    print("stage breakdown (mean us over frames with detections):")
    for stage, mean_us in report.stage_mean_us.items():
        print(f"  {stage:14s} {mean_us:9.1f}")
    print("stage failures (count, % of frames with a failure):")
    for stage in report.failure_counts:
        print(f"  {stage:14s} {report.failure_counts[stage]:6d}  "
              f"{report.failure_frame_pct[stage]:5.1f}%")
    if args.csv:
        evaluation.write_timing_csv(args.csv, report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chromatag",
                                     description="Colored fiducial tag toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render a tag image")
    p.add_argument("--id", type=int, required=True)
    p.add_argument("--rotation", type=int, default=0, choices=(0, 1, 2, 3))
    p.add_argument("--px-per-cell", dest="px_per_cell", type=int, default=16)
    p.add_argument("--config")
    p.add_argument("output", help="output image path (.png or .ppm)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("detect", help="detect tags in images, JSON lines out")
    p.add_argument("images", nargs="+")
    p.add_argument("--config")
    p.add_argument("--output", help="write JSON lines here instead of stdout")
    _add_detector_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth sweep")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config")
    p.add_argument("--backgrounds", help="background image directory (default: built-in corpus)")
    p.add_argument("--seed", type=int)
    p.add_argument("--sizes", type=float, nargs="+")
    p.add_argument("--angles", type=float, nargs="+")
    p.add_argument("--presets", nargs="+")
    p.add_argument("--ids-per-cell", dest="ids_per_cell", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score detections against a manifest")
    p.add_argument("--detections", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--frames-dir", help="directory of manifest frames (default: manifest dir)")
    p.add_argument("--iou-thresh", dest="iou_thresh", type=float, default=0.5)
    p.add_argument("--radii", type=float, nargs="+", default=[1, 2, 3, 4, 5])
    p.add_argument("--size-edges", dest="size_edges", type=float, nargs="+",
                   default=[0, 30, 50, 70, 90, 110, 130, 150, 170, 260])
    p.add_argument("--angle-edges", dest="angle_edges", type=float, nargs="+",
                   default=[0, 10, 20, 30, 40, 50, 60, 70, 80, 90])
    p.add_argument("--step", type=int, help="grid stride for the histogram scan")
    p.add_argument("--no-histogram", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="timing benchmark over an image directory")
    p.add_argument("images_dir")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--config")
    p.add_argument("--csv", help="also write the timing report CSV here")
    _add_detector_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
