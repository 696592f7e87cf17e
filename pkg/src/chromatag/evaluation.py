"""Scoring and reporting: matching, recall binning, histograms, timing tables.

A detection is a true positive when it overlaps a ground-truth quad with at
least the IoU threshold (0.5 by default) and carries the correct ID; wrong-ID
overlaps count once as a false positive and once as a false negative. Corner
accuracy is reported as the fraction of matched corners within given radii
after optimal cyclic corner alignment. All reports are written as CSV with a
schema comment line so downstream tooling can check versions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .colorspace import rgb_to_lab_array
from .detector import STAGES
from .geometry import quad_iou

SCHEMA_PREFIX = "chromatag"


@dataclass
class Metrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float | None:
        d = self.tp + self.fp
        return self.tp / d if d else None

    @property
    def recall(self) -> float | None:
        d = self.tp + self.fn
        return self.tp / d if d else None

    def add(self, other: "Metrics") -> None:
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn


@dataclass(frozen=True)
class GroundTruth:
    id: int
    quad: np.ndarray

    @classmethod
    def from_record(cls, record: dict) -> "GroundTruth":
        return cls(id=int(record["id"]), quad=np.asarray(record["corners"], dtype=np.float64))


def match_frame(detections, ground_truths, iou_thresh: float = 0.5,
                ) -> tuple[Metrics, list[tuple[int, int, float]]]:
    """Greedy IoU matching of one frame's detections against its ground truth.

    Returns the metrics contribution and the list of id-correct matches as
    ``(detection_index, ground_truth_index, iou)``. Each ground truth matches
    at most once; pairs above the threshold with mismatched IDs consume both
    entries and count as one false positive plus one false negative.
    """
    pairs = []
    for di, det in enumerate(detections):
        for gi, gt in enumerate(ground_truths):
            iou = quad_iou(det.quad, gt.quad)
            if iou >= iou_thresh:
                pairs.append((iou, di, gi))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))

    used_det: set[int] = set()
    used_gt: set[int] = set()
    matches: list[tuple[int, int, float]] = []
    m = Metrics()
    for iou, di, gi in pairs:
        if di in used_det or gi in used_gt:
            continue
        used_det.add(di)
        used_gt.add(gi)
        if detections[di].id == ground_truths[gi].id:
            m.tp += 1
            matches.append((di, gi, iou))
        else:
            m.fp += 1
            m.fn += 1
    m.fp += len(detections) - len(used_det)
    m.fn += len(ground_truths) - len(used_gt)
    return m, matches


def corner_errors(det_quad: np.ndarray, gt_quad: np.ndarray) -> np.ndarray:
    """Per-corner Euclidean errors under the best cyclic corner alignment."""
    det = np.asarray(det_quad, dtype=np.float64)
    gt = np.asarray(gt_quad, dtype=np.float64)
    best = None
    for shift in range(4):
        errs = np.hypot(*(np.roll(det, shift, axis=0) - gt).T)
        if best is None or errs.sum() < best.sum():
            best = errs
    return best


def corner_error_cdf(det_quads, gt_quads, radii) -> dict[float, float]:
    """Fraction of matched corners within each radius; quads must be paired."""
    if len(det_quads) != len(gt_quads):
        raise ValueError("detection and ground-truth quad lists must align")
    errs: list[float] = []
    for dq, gq in zip(det_quads, gt_quads):
        errs.extend(corner_errors(dq, gq).tolist())
    arr = np.asarray(errs)
    return {float(r): float((arr <= r).mean()) if arr.size else 0.0 for r in radii}


@dataclass
class BinnedRecall:
    axis: str
    edges: np.ndarray                   # 1-D edges, or (size_edges, angle_edges)
    metrics: list                       # Metrics per bin; 2-D nested for joint
    angle_edges: np.ndarray | None = None


def _bin_index(value: float, edges: np.ndarray) -> int | None:
    idx = int(np.searchsorted(edges, value, side="right")) - 1
    if idx < 0 or idx >= len(edges) - 1:
        return None
    return idx


def bin_recall(frame_metrics: list[tuple[dict, Metrics]], axis: str,
               edges, angle_edges=None) -> BinnedRecall:
    """Aggregate per-frame metrics into recall bins along one or two axes.

    ``frame_metrics`` pairs each manifest record with that frame's metrics
    contribution. ``axis`` is ``tag_size``, ``viewing_angle``, or ``joint``
    (which needs both edge arrays and produces a 2-D grid).
    """
    if axis == "joint":
        size_edges = np.asarray(edges, dtype=np.float64)
        ang_edges = np.asarray(angle_edges, dtype=np.float64)
        grid = [[Metrics() for _ in range(len(ang_edges) - 1)]
                for _ in range(len(size_edges) - 1)]
        for record, m in frame_metrics:
            si = _bin_index(float(record["tag_size"]), size_edges)
            ai = _bin_index(float(record["viewing_angle"]), ang_edges)
            if si is not None and ai is not None:
                grid[si][ai].add(m)
        return BinnedRecall(axis=axis, edges=size_edges, metrics=grid,
                            angle_edges=ang_edges)

    if axis not in ("tag_size", "viewing_angle"):
        raise ValueError(f"unknown binning axis {axis!r}")
    edges = np.asarray(edges, dtype=np.float64)
    bins = [Metrics() for _ in range(len(edges) - 1)]
    for record, m in frame_metrics:
        bi = _bin_index(float(record[axis]), edges)
        if bi is not None:
            bins[bi].add(m)
    return BinnedRecall(axis=axis, edges=edges, metrics=bins)


@dataclass
class ADiffHistogram:
    edges: np.ndarray
    counts: np.ndarray
    mode: str  # "background_all" or "tag_region_max"


def _points_in_quad(xs: np.ndarray, ys: np.ndarray, quad: np.ndarray) -> np.ndarray:
    """Vectorized point-in-convex-quad test (orientation independent)."""
    q = np.asarray(quad, dtype=np.float64)
    sign = 1.0 if quad_area_sign(q) >= 0 else -1.0
    inside = np.ones(xs.shape, dtype=bool)
    for k in range(len(q)):
        a = q[k]
        b = q[(k + 1) % len(q)]
        cross = (b[0] - a[0]) * (ys - a[1]) - (b[1] - a[1]) * (xs - a[0])
        inside &= (cross * sign) >= 0
    return inside


def quad_area_sign(quad: np.ndarray) -> float:
    x, y = quad[:, 0], quad[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def adiff_histogram(images, tag_masks=None, step: int = 4,
                    edges=None) -> ADiffHistogram:
    """Histogram of A-channel differences from grid-scanning the images.

    Scans every ``step``-th row with column stride ``step`` (the detector's
    access pattern). Without masks every difference is binned; with one quad
    per image, only the per-image maximum difference among samples inside the
    quad is binned.
    """
    if step < 1:
        raise ValueError("step must be >= 1")
    mode = "background_all" if tag_masks is None else "tag_region_max"
    if edges is None:
        edges = np.arange(-255.5, 256.5, 1.0)
    edges = np.asarray(edges, dtype=np.float64)
    counts = np.zeros(len(edges) - 1, dtype=np.int64)

    for i, image in enumerate(images):
        grid = image[::step, ::step]
        a = rgb_to_lab_array(grid.reshape(-1, 3))[:, 1].astype(np.int16)
        a = a.reshape(grid.shape[0], grid.shape[1])
        diffs = (a[:, 1:] - a[:, :-1]).astype(np.float64)
        if tag_masks is None:
            counts += np.histogram(diffs.ravel(), bins=edges)[0]
            continue
        quad = np.asarray(tag_masks[i], dtype=np.float64)
        rows = np.arange(0, image.shape[0], step, dtype=np.float64) + 0.5
        cols = np.arange(0, image.shape[1], step, dtype=np.float64) + 0.5
        gy, gx = np.meshgrid(rows, cols, indexing="ij")
        inside = _points_in_quad(gx, gy, quad)
        pair_inside = inside[:, 1:] & inside[:, :-1]
        if not pair_inside.any():
            continue
        counts += np.histogram([float(diffs[pair_inside].max())], bins=edges)[0]
    return ADiffHistogram(edges=edges, counts=counts, mode=mode)


@dataclass
class TimingReport:
    n_frames: int
    n_detect_frames: int
    stage_mean_us: dict[str, float]         # over frames with >= 1 detection
    fps_total: float | None
    fps_detect: float | None
    fps_empty: float | None
    failure_counts: dict[str, int]
    failure_frame_pct: dict[str, float]
    mean_frame_us: float | None = None
    median_frame_us: float | None = None


def timing_report(frame_records: list[dict]) -> TimingReport:
    """Aggregate per-frame stage timings and failures.

    Each record needs ``stage_times_us`` (dict), ``stage_failures`` (dict) and
    ``n_detections`` (int). FPS figures are 1 over the mean frame time,
    computed over all frames, frames with detections, and empty frames.
    """
    totals = []
    det_totals = []
    empty_totals = []
    stage_sums = {s: 0.0 for s in STAGES}
    failure_counts = {s: 0 for s in STAGES}
    failure_frames = {s: 0 for s in STAGES}
    n_detect = 0
    for rec in frame_records:
        times = rec["stage_times_us"]
        total = sum(times.values())
        totals.append(total)
        if rec["n_detections"] > 0:
            n_detect += 1
            det_totals.append(total)
            for s in STAGES:
                stage_sums[s] += times.get(s, 0.0)
        else:
            empty_totals.append(total)
        for s in STAGES:
            n_failed = int(rec["stage_failures"].get(s, 0))
            failure_counts[s] += n_failed
            if n_failed:
                failure_frames[s] += 1

    def fps(values: list[float]) -> float | None:
        if not values:
            return None
        mean = float(np.mean(values))
        return 1e6 / mean if mean > 0 else None

    n = len(frame_records)
    return TimingReport(
        n_frames=n,
        n_detect_frames=n_detect,
        stage_mean_us={s: (stage_sums[s] / n_detect if n_detect else 0.0) for s in STAGES},
        fps_total=fps(totals),
        fps_detect=fps(det_totals),
        fps_empty=fps(empty_totals),
        failure_counts=failure_counts,
        failure_frame_pct={s: (100.0 * failure_frames[s] / n if n else 0.0) for s in STAGES},
        mean_frame_us=float(np.mean(totals)) if totals else None,
        median_frame_us=float(np.median(totals)) if totals else None,
    )


# ----------------------------------------------------------------------
# CSV writers. Every file starts with a "# schema=..." comment line.

def _open_csv(path: Path, schema: str):
    f = open(path, "w", newline="")
    f.write(f"# schema={SCHEMA_PREFIX}.{schema}.v1\n")
    return f


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_metrics_csv(path: str | Path, rows: list[tuple[str, Metrics]]) -> None:
    with _open_csv(Path(path), "metrics") as f:
        w = csv.writer(f)
        w.writerow(["subset", "tp", "fp", "fn", "precision", "recall"])
        for name, m in rows:
            w.writerow([name, m.tp, m.fp, m.fn, _fmt(m.precision), _fmt(m.recall)])


def write_binned_recall_csv(path: str | Path, binned: BinnedRecall) -> None:
    with _open_csv(Path(path), f"recall_{binned.axis}") as f:
        w = csv.writer(f)
        if binned.axis == "joint":
            w.writerow(["size_lo", "size_hi", "angle_lo", "angle_hi", "gt", "tp", "recall"])
            for si in range(len(binned.edges) - 1):
                for ai in range(len(binned.angle_edges) - 1):
                    m = binned.metrics[si][ai]
                    w.writerow([_fmt(binned.edges[si]), _fmt(binned.edges[si + 1]),
                                _fmt(binned.angle_edges[ai]), _fmt(binned.angle_edges[ai + 1]),
                                m.tp + m.fn, m.tp, _fmt(m.recall)])
        else:
            w.writerow(["bin_lo", "bin_hi", "gt", "tp", "recall"])
            for bi, m in enumerate(binned.metrics):
                w.writerow([_fmt(binned.edges[bi]), _fmt(binned.edges[bi + 1]),
                            m.tp + m.fn, m.tp, _fmt(m.recall)])


def write_corner_cdf_csv(path: str | Path, cdf: dict[float, float], n_corners: int) -> None:
    with _open_csv(Path(path), "corner_cdf") as f:
        w = csv.writer(f)
        w.writerow(["radius_px", "fraction", "n_corners"])
        for r in sorted(cdf):
            w.writerow([_fmt(r), _fmt(cdf[r]), n_corners])


def write_histogram_csv(path: str | Path, hist: ADiffHistogram) -> None:
    with _open_csv(Path(path), "adiff_histogram") as f:
        w = csv.writer(f)
        w.writerow(["bin_lo", "bin_hi", "count", "mode"])
        for i, c in enumerate(hist.counts):
            if c:
                w.writerow([_fmt(hist.edges[i]), _fmt(hist.edges[i + 1]), int(c), hist.mode])


def write_timing_csv(path: str | Path, report: TimingReport) -> None:
    with _open_csv(Path(path), "timing") as f:
        w = csv.writer(f)
        w.writerow(["metric", "value"])
        w.writerow(["n_frames", report.n_frames])
        w.writerow(["n_detect_frames", report.n_detect_frames])
        w.writerow(["fps_total", _fmt(report.fps_total)])
        w.writerow(["fps_detect", _fmt(report.fps_detect)])
        w.writerow(["fps_empty", _fmt(report.fps_empty)])
        w.writerow(["mean_frame_us", _fmt(report.mean_frame_us)])
        w.writerow(["median_frame_us", _fmt(report.median_frame_us)])
        for s in STAGES:
            w.writerow([f"stage_mean_us.{s}", _fmt(report.stage_mean_us[s])])
        for s in STAGES:
            w.writerow([f"failures.{s}", report.failure_counts[s]])
        for s in STAGES:
            w.writerow([f"failure_frame_pct.{s}", _fmt(report.failure_frame_pct[s])])
