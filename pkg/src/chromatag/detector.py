"""The five-stage detection pipeline.

A frame is scanned on a sparse grid for strong positive jumps in the
red-green opponent channel. Each trigger seeds a cascade: axis-aligned scans
estimate the tag center and build three initial border polygons
(``initial_scan``), greedy rays grow the outer polygon until it hugs the
black-white border (``build_polygon``), a quadrilateral is fitted and its
corners refined on the luminance channel (``poly_to_quad``), and the code is
sampled through a homography and matched against the signature table
(``decode``). Every comparison is a difference against a reference color
captured from the frame itself, which is what makes the pipeline robust to
lighting and print variation.

Seeds that fail any stage are abandoned; the failing stage is counted.
Stage wall-clock times are accumulated per frame.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import taggen
from .codec import RED, SignatureTable, builtin_signature_table, decode_bits
from .colorspace import LabPixel, LabTable, default_table, rgb_to_lab_array
from .geometry import (
    GeometryError,
    corner_score_patch,
    estimate_homography,
    fit_quad,
    is_convex_ccw,
    order_quad,
    polygon_area,
    potential_areas,
    project,
)

STAGES = ("find_a_diff", "initial_scan", "build_polygon", "poly_to_quad", "decode")

# Scan directions for the initial center search: left, right, up, down.
_DIRS = np.array([(-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)])

_FIRST_CHUNK = 48  # initial ray gather length; extended to the cap on demand


@dataclass
class DetectorParams:
    """Tuning knobs for the pipeline; defaults follow the reference settings."""

    step: int = 4                   # grid stride in pixels
    a_diff_thresh: int = 25         # trigger threshold on grid A-channel jumps
    border_run: int = 3             # successive qualifying pixels per border
    border_thresh: int = 5          # per-pixel difference threshold in scans
    conv_thresh: float = 0.98       # polygon-to-attainable-area convergence ratio
    max_center_iters: int = 10
    max_polygon_scans: int = 40
    patch_scale: float = 0.1        # corner patch radius as a fraction of edge length
    min_decode_contrast: int = 10   # required B-channel spread within a region
    use_lut: bool = True            # route conversions through the shared LAB table

    def validate(self) -> None:
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if self.border_run < 1:
            raise ValueError("border_run must be >= 1")
        if not 0.0 < self.conv_thresh < 1.0:
            raise ValueError("conv_thresh must be in (0, 1)")


@dataclass
class TmpDet:
    """An in-flight detection between pipeline stages."""

    reference_red: LabPixel
    reference_green: LabPixel
    reference_black: LabPixel
    center: np.ndarray
    ring_rg: np.ndarray
    ring_gb: np.ndarray
    ring_bw: np.ndarray
    seed: tuple[int, int]  # (row, col) of the triggering grid sample


@dataclass
class Detection:
    """A decoded tag: family index, in-image rotation, border quad, center."""

    id: int
    rotation: int
    quad: np.ndarray    # black-white border corners, CCW from top-left-most
    center: np.ndarray


@dataclass
class FrameResult:
    detections: list[Detection]
    stage_times_us: dict[str, float]
    stage_failures: dict[str, int]
    seeds: int = 0

    @property
    def total_time_us(self) -> float:
        return sum(self.stage_times_us.values())


class _LabView:
    """Framewise gather-and-convert access to LAB values as signed ints."""

    def __init__(self, image: np.ndarray, table: LabTable | None):
        self.image = np.ascontiguousarray(image)
        self.h, self.w = image.shape[:2]
        self._flat = self.image.reshape(-1, 3)
        self._table = table

    def convert(self, pixels: np.ndarray) -> np.ndarray:
        flat = np.ascontiguousarray(pixels.reshape(-1, 3))
        if self._table is not None:
            lab = self._table.convert(flat)
        else:
            lab = rgb_to_lab_array(flat)
        return lab.astype(np.int16)

    def convert_a(self, pixels: np.ndarray) -> np.ndarray:
        """A channel only; one gather narrower than full conversion."""
        flat = np.ascontiguousarray(pixels.reshape(-1, 3))
        if self._table is not None:
            a = self._table.convert(flat, channel=1)
        else:
            a = rgb_to_lab_array(flat)[:, 1]
        return a.astype(np.int16)

    def lab_at(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return self.convert(self._flat[rows * self.w + cols])

    def lab_pixel(self, row: int, col: int) -> LabPixel:
        l, a, b = self.convert(self.image[row, col].reshape(1, 3))[0]
        return LabPixel(int(l), int(a), int(b))

    def luma_window(self, r0: int, r1: int, c0: int, c1: int) -> np.ndarray:
        """L channel over pixel rows r0..r1 and cols c0..c1 inclusive."""
        block = self.image[r0:r1 + 1, c0:c1 + 1]
        lab = self.convert(block)
        return lab[:, 0].reshape(block.shape[0], block.shape[1])


def _first_run(qualify: np.ndarray, run: int) -> int:
    """Index of the first pixel of the first run of ``run`` True values, or -1."""
    n = qualify.shape[0]
    if n < run:
        return -1
    acc = qualify[run - 1:]
    for k in range(1, run):
        acc = acc & qualify[run - 1 - k:n - k]
    i = int(np.argmax(acc))
    if not acc[i]:
        return -1
    return i


class _Ray:
    """Pixel samples along a ray, truncated at the image border."""

    __slots__ = ("xs", "ys", "lab", "hit_border")

    def __init__(self, view: _LabView, start: np.ndarray, direction: np.ndarray,
                 length: int):
        ks = np.arange(1, max(int(length), 1) + 1, dtype=np.float64)
        xs = start[0] + ks * direction[0]
        ys = start[1] + ks * direction[1]
        cols = np.floor(xs).astype(np.intp)
        rows = np.floor(ys).astype(np.intp)
        inside = (cols >= 0) & (cols < view.w) & (rows >= 0) & (rows < view.h)
        if inside.all():
            n = len(ks)
            self.hit_border = False
        else:
            n = int(np.argmin(inside))
            self.hit_border = True
        self.xs = xs[:n]
        self.ys = ys[:n]
        self.lab = view.lab_at(rows[:n], cols[:n]) if n else np.empty((0, 3), np.int16)

    def __len__(self) -> int:
        return len(self.xs)

    def point(self, i: int) -> np.ndarray:
        return np.array([self.xs[i], self.ys[i]])


class _RayBundle:
    """Samples along several rays from one start point, gathered in one pass.

    Out-of-bounds samples are kept in the arrays (pixel indices clipped) but
    flagged; ``inside_len`` gives the per-ray valid prefix length because rays
    leave the image monotonically.
    """

    __slots__ = ("xs", "ys", "lab", "inside", "inside_len", "length")

    def __init__(self, view: _LabView, start: np.ndarray, dirs: np.ndarray,
                 length: int):
        length = max(int(length), 1)
        ks = np.arange(1, length + 1, dtype=np.float64)
        xs = start[0] + dirs[:, 0:1] * ks
        ys = start[1] + dirs[:, 1:2] * ks
        cols = np.floor(xs).astype(np.intp)
        rows = np.floor(ys).astype(np.intp)
        inside = (cols >= 0) & (cols < view.w) & (rows >= 0) & (rows < view.h)
        np.clip(cols, 0, view.w - 1, out=cols)
        np.clip(rows, 0, view.h - 1, out=rows)
        lab = view.lab_at(rows.ravel(), cols.ravel())
        self.xs = xs
        self.ys = ys
        self.lab = lab.reshape(dirs.shape[0], length, 3)
        self.inside = inside
        self.inside_len = inside.sum(axis=1)
        self.length = length

    def point(self, ray: int, i: int) -> np.ndarray:
        return np.array([self.xs[ray, i], self.ys[ray, i]])


def _first_runs_2d(qualify: np.ndarray, run: int) -> np.ndarray:
    """Per-row first index of ``run`` consecutive True values; -1 when absent."""
    n = qualify.shape[1]
    if n < run:
        return np.full(qualify.shape[0], -1)
    acc = qualify[:, run - 1:]
    for k in range(1, run):
        acc = acc & qualify[:, run - 1 - k:n - k]
    idx = np.argmax(acc, axis=1)
    found = acc[np.arange(acc.shape[0]), idx]
    return np.where(found, idx, -1)


def _ring_from_points(points: list[np.ndarray], center: np.ndarray) -> np.ndarray:
    pts = np.array(points)
    angles = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
    return pts[np.argsort(angles, kind="stable")]


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _concave_beyond(o, a, b, tol_px: float) -> bool:
    """True when the turn o->a->b bends inward by more than tol_px of sagitta.

    Border samples carry sub-pixel jitter, so collinear runs of ring points
    routinely produce slightly negative cross products; the tolerance is the
    perpendicular deviation of the middle point from its neighbors' chord.
    """
    cr = _cross(o, a, b)
    if cr >= 0:
        return False
    chord = math.hypot(b[0] - o[0], b[1] - o[1])
    return -cr > tol_px * max(chord, 1.0)


def _insert_ring_point(ring: np.ndarray, pt: np.ndarray, center: np.ndarray,
                       tol_px: float = 1.5) -> np.ndarray | None:
    """Insert a point into a star-shaped convex ring kept in angular order.

    Returns the grown ring, or None when the point duplicates a neighbor or
    would bend the ring inward beyond the jitter tolerance. Only the three
    turn angles touched by the insertion need checking because the ring is
    convex beforehand.
    """
    n = len(ring)
    angles = np.arctan2(ring[:, 1] - center[1], ring[:, 0] - center[0])
    ang = math.atan2(pt[1] - center[1], pt[0] - center[0])
    pos = int(np.searchsorted(angles, ang))
    b = ring[(pos - 1) % n]
    c = ring[pos % n]
    if min(math.hypot(pt[0] - b[0], pt[1] - b[1]),
           math.hypot(pt[0] - c[0], pt[1] - c[1])) < 0.5:
        return None
    a = ring[(pos - 2) % n]
    d = ring[(pos + 1) % n]
    if (_concave_beyond(a, b, pt, tol_px) or _concave_beyond(b, pt, c, tol_px)
            or _concave_beyond(pt, c, d, tol_px)):
        return None
    return np.concatenate([ring[:pos], pt.reshape(1, 2), ring[pos:]])


class ChromaTagDetector:
    """Detects tags of one code family in RGB frames.

    Instances are cheap; the signature table and the LAB lookup table may be
    shared freely across instances and threads (single-threaded per frame).
    """

    def __init__(self, table: SignatureTable | None = None,
                 params: DetectorParams | None = None,
                 lab_table: LabTable | None = None):
        self.table = table if table is not None else builtin_signature_table()
        self.params = params if params is not None else DetectorParams()
        self.params.validate()
        self._lab = lab_table
        self._canonical = taggen.canonical_border_corners()
        self._cells = taggen.canonical_cell_centers()
        layout = self.table.family.layout
        self._red_cells = np.array([i for i in range(16)
                                    if layout.cell_region(i // 4, i % 4) == RED])
        self._green_cells = np.array([i for i in range(16)
                                      if layout.cell_region(i // 4, i % 4) != RED])

    def _view(self, image: np.ndarray) -> _LabView:
        image = np.asarray(image)
        if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
            raise ValueError("expected an (H, W, 3) uint8 RGB image")
        if self.params.use_lut:
            lab = self._lab if self._lab is not None else default_table()
        else:
            lab = None
        return _LabView(image, lab)

    # ------------------------------------------------------------------
    # full pipeline

    def detect(self, image: np.ndarray) -> FrameResult:
        """Run the full pipeline over one frame."""
        p = self.params
        view = self._view(image)
        if min(view.h, view.w) < 8 * p.step:
            raise ValueError("image must be at least 8 grid steps on each side")

        t_frame = time.perf_counter()
        times = {name: 0.0 for name in STAGES}
        failures = {name: 0 for name in STAGES}
        detections: list[Detection] = []
        boxes: list[tuple[float, float, float, float]] = []
        seeds = 0

        grid_rows = np.arange(0, view.h, p.step)
        grid_cols = np.arange(0, view.w, p.step)
        grid_px = view.image[::p.step, ::p.step]
        a_grid = view.convert_a(grid_px).reshape(len(grid_rows), len(grid_cols))
        trigger = (a_grid[:, 1:] - a_grid[:, :-1]) > p.a_diff_thresh
        trig_rows, trig_cols = np.nonzero(trigger)
        trig_cols = trig_cols + 1  # diff index -> grid column index

        row_starts = np.searchsorted(trig_rows, np.arange(len(grid_rows) + 1))
        for ri in np.unique(trig_rows):
            row_y = grid_rows[ri] + 0.5
            cand = trig_cols[row_starts[ri]:row_starts[ri + 1]]
            for ci in cand:
                x = grid_cols[ci] + 0.5
                x_prev = grid_cols[ci - 1] + 0.5
                if any(b[0] <= x <= b[2] and b[1] <= row_y <= b[3] for b in boxes):
                    continue  # inside a previous detection: skipped by the scan
                if any(b[0] <= x_prev <= b[2] and b[1] <= row_y <= b[3] for b in boxes):
                    continue  # previous grid sample was the post-skip baseline
                seeds += 1
                det = self._cascade(view, int(grid_rows[ri]), int(grid_cols[ci]),
                                    times, failures)
                if det is not None:
                    detections.append(det)
                    qx, qy = det.quad[:, 0], det.quad[:, 1]
                    boxes.append((float(qx.min()), float(qy.min()),
                                  float(qx.max()), float(qy.max())))

        total_us = (time.perf_counter() - t_frame) * 1e6
        times["find_a_diff"] = total_us - sum(times[s] for s in STAGES[1:])
        return FrameResult(detections=detections, stage_times_us=times,
                           stage_failures=failures, seeds=seeds)

    def _cascade(self, view: _LabView, row: int, col: int,
                 times: dict[str, float], failures: dict[str, int]) -> Detection | None:
        t0 = time.perf_counter()
        tmp = self._initial_scan(view, row, col)
        t1 = time.perf_counter()
        times["initial_scan"] += (t1 - t0) * 1e6
        if tmp is None:
            failures["initial_scan"] += 1
            return None

        ok = self._build_polygon(view, tmp)
        t2 = time.perf_counter()
        times["build_polygon"] += (t2 - t1) * 1e6
        if not ok:
            failures["build_polygon"] += 1
            return None

        quad = self._poly_to_quad(view, tmp)
        t3 = time.perf_counter()
        times["poly_to_quad"] += (t3 - t2) * 1e6
        if quad is None:
            failures["poly_to_quad"] += 1
            return None

        decoded = self._decode(view, quad)
        t4 = time.perf_counter()
        times["decode"] += (t4 - t3) * 1e6
        if decoded is None:
            failures["decode"] += 1
            return None
        tag_id, rotation = decoded
        return Detection(id=tag_id, rotation=rotation, quad=quad, center=tmp.center)

    # ------------------------------------------------------------------
    # stage 2: initial scan

    def _initial_scan(self, view: _LabView, row: int, col: int) -> TmpDet | None:
        p = self.params
        ref_red = view.lab_pixel(row, col)
        center = np.array([col + 0.5, row + 0.5])
        cap = int(min(min(view.h, view.w) / 2, 256))

        ref_green: LabPixel | None = None
        for _ in range(p.max_center_iters):
            found = self._rg_borders_bundle(view, center, cap, ref_red.a)
            if found is None:
                return None
            pts, beyond = found
            # The lowest-A beyond-border sample is the safest green reference:
            # it carries the least contamination from the red side of the
            # border, preserving the upward margin to black for the outer
            # border scans.
            g = beyond[int(np.argmin(beyond[:, 1]))]
            ref_green = LabPixel(int(g[0]), int(g[1]), int(g[2]))
            new_center = pts.mean(axis=0)
            moved = float(math.hypot(new_center[0] - center[0], new_center[1] - center[1]))
            center = new_center
            if moved < 1.0:
                break
        assert ref_green is not None

        rg_dist = float(np.max(np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])))
        res = self._three_borders_bundle(view, center, cap, ref_red, ref_green,
                                         first_len=int(5 * (rg_dist + 2) + 14))
        if res is None:
            return None
        rg_pts, gb_pts, bw_pts, ref_black = res

        return TmpDet(
            reference_red=ref_red,
            reference_green=ref_green,
            reference_black=ref_black,
            center=center,
            ring_rg=_ring_from_points(rg_pts, center),
            ring_gb=_ring_from_points(gb_pts, center),
            ring_bw=_ring_from_points(bw_pts, center),
            seed=(row, col),
        )

    def _rg_bundle(self, view: _LabView, center: np.ndarray, cap: int,
                   ref_a: int, first_len: int = _FIRST_CHUNK,
                   ) -> tuple[_RayBundle, np.ndarray] | None:
        """Bundle the four axis rays and find each red-green border index."""
        p = self.params
        bundle = _RayBundle(view, center, _DIRS, min(first_len, cap))
        qualify = ((ref_a - bundle.lab[:, :, 1]) > p.border_thresh) & bundle.inside
        idx = _first_runs_2d(qualify, p.border_run)
        if (idx < 0).any() and bundle.length < cap:
            extendable = (idx < 0) & (bundle.inside_len == bundle.length)
            if extendable.any():
                bundle = _RayBundle(view, center, _DIRS, cap)
                qualify = ((ref_a - bundle.lab[:, :, 1]) > p.border_thresh) & bundle.inside
                idx = _first_runs_2d(qualify, p.border_run)
        if (idx < 0).any():
            return None
        return bundle, idx

    def _rg_borders_bundle(self, view: _LabView, center: np.ndarray, cap: int,
                           ref_a: int) -> tuple[np.ndarray, np.ndarray] | None:
        """Red-green border points and past-border values for all four rays."""
        found = self._rg_bundle(view, center, cap, ref_a)
        if found is None:
            return None
        bundle, idx = found
        rays = np.arange(4)
        pts = np.stack([bundle.xs[rays, idx], bundle.ys[rays, idx]], axis=1)
        b0 = np.minimum(idx + self.params.border_run, bundle.inside_len - 1)
        b1 = np.minimum(b0 + 1, bundle.inside_len - 1)
        lab0 = bundle.lab[rays, b0]
        lab1 = bundle.lab[rays, b1]
        beyond = np.where((lab1[:, 1] < lab0[:, 1])[:, None], lab1, lab0)
        return pts, beyond

    def _three_borders_bundle(self, view: _LabView, center: np.ndarray, cap: int,
                              ref_red: LabPixel, ref_green: LabPixel,
                              first_len: int = _FIRST_CHUNK,
                              ) -> tuple[list, list, list, LabPixel] | None:
        """All three border points along each of the four axis rays."""
        p = self.params
        m = p.border_run
        found = self._rg_bundle(view, center, cap, ref_red.a, first_len=first_len)
        if found is None:
            return None
        bundle, idx = found

        for _ in range(2):
            rg_pts: list[np.ndarray] = []
            gb_pts: list[np.ndarray] = []
            bw_pts: list[np.ndarray] = []
            ref_black: LabPixel | None = None
            complete = True
            for d in range(4):
                a = bundle.lab[d, :, 1]
                lum = bundle.lab[d, :, 0]
                ins = bundle.inside[d]
                i1 = int(idx[d])
                # Each follow-up search starts at the previous run's end: the
                # border-crossing blur ramp would otherwise satisfy the next
                # border's test immediately.
                s2 = i1 + m
                i2rel = _first_run(((a[s2:] - ref_green.a) > p.border_thresh) & ins[s2:], m)
                if i2rel < 0:
                    complete = False
                    break
                i2 = s2 + i2rel
                if ref_black is None:
                    kb = min(i2 + m, int(bundle.inside_len[d]) - 1)
                    kb1 = min(kb + 1, int(bundle.inside_len[d]) - 1)
                    lb = min(bundle.lab[d, kb], bundle.lab[d, kb1], key=lambda v: v[0])
                    ref_black = LabPixel(int(lb[0]), int(lb[1]), int(lb[2]))
                s3 = i2 + m
                i3rel = _first_run(((lum[s3:] - ref_black.l) > p.border_thresh) & ins[s3:], m)
                if i3rel < 0:
                    complete = False
                    break
                i3 = s3 + i3rel
                rg_pts.append(bundle.point(d, i1))
                gb_pts.append(bundle.point(d, i2))
                bw_pts.append(bundle.point(d, i3))
            if complete:
                assert ref_black is not None
                return rg_pts, gb_pts, bw_pts, ref_black
            # The outer borders sit within a few multiples of the inner
            # border's distance; extend the bundle once before giving up.
            needed = 8 * (int(idx.max()) + 1) + 16
            if bundle.length >= needed or not (bundle.inside_len == bundle.length).any():
                return None
            bundle = _RayBundle(view, center, _DIRS, needed)
        return None

    def _scan_three_borders(self, view: _LabView, start: np.ndarray,
                            direction: np.ndarray, cap: int, ref_red: LabPixel,
                            ref_green: LabPixel, ref_black: LabPixel | None,
                            first_len: int = _FIRST_CHUNK,
                            ) -> tuple[np.ndarray, np.ndarray, np.ndarray, LabPixel] | None:
        """Walk one ray across all three borders; None when any is missing."""
        p = self.params
        m = p.border_run
        ray = _Ray(view, start, direction, min(first_len, cap))
        a = ray.lab[:, 1]
        i1 = _first_run((ref_red.a - a) > p.border_thresh, m)
        if i1 < 0 and len(ray) < cap and not ray.hit_border:
            ray = _Ray(view, start, direction, cap)
            a = ray.lab[:, 1]
            i1 = _first_run((ref_red.a - a) > p.border_thresh, m)
        if i1 < 0:
            return None

        for _ in range(2):
            # Follow-up searches skip the crossing ramp, as in the bundle path.
            s2 = i1 + m
            i2rel = _first_run((a[s2:] - ref_green.a) > p.border_thresh, m)
            i2 = s2 + i2rel if i2rel >= 0 else -1
            i3 = -1
            if i2 >= 0:
                black = ref_black
                if black is None:
                    kb = min(i2 + m, len(ray) - 1)
                    lb = ray.lab[kb]
                    black = LabPixel(int(lb[0]), int(lb[1]), int(lb[2]))
                s3 = i2 + m
                i3rel = _first_run((ray.lab[s3:, 0] - black.l) > p.border_thresh, m)
                if i3rel >= 0:
                    i3 = s3 + i3rel
            if i3 >= 0:
                return ray.point(i1), ray.point(i2), ray.point(i3), black
            # The outer borders sit at roughly 2x and 3x the first border's
            # distance; extend once if the gather was too short.
            needed = 8 * (i1 + 1) + 16
            if len(ray) >= needed or ray.hit_border:
                return None
            ray = _Ray(view, start, direction, needed)
            a = ray.lab[:, 1]
        return None

    # ------------------------------------------------------------------
    # stage 3: polygon growth

    def _build_polygon(self, view: _LabView, tmp: TmpDet) -> bool:
        p = self.params
        suppressed: set[tuple[float, float]] = set()
        settled: set[tuple[float, float, float, float]] = set()

        def edge_key(a, b) -> tuple[float, float, float, float]:
            return (round(a[0], 2), round(a[1], 2), round(b[0], 2), round(b[1], 2))

        for _ in range(p.max_polygon_scans):
            ring = tmp.ring_bw
            n = len(ring)
            area = polygon_area(ring)
            if area <= 0:
                return False
            areas, apexes, unbounded = potential_areas(ring)
            # Unbounded growth stays eligible at a sentinel of the current
            # polygon area, aimed at the edge midpoint; bounded potentials are
            # capped at the same sentinel so that the near-parallel apexes of
            # freshly split edges cannot dominate the ratio. Edges inside a
            # straight run (neighbors parallel to the edge itself) have no
            # real growth corridor, only sampling jitter: they are ineligible.
            np.minimum(areas, area, out=areas)
            nxt = np.concatenate([ring[1:], ring[:1]])
            prev = np.concatenate([ring[-1:], ring[:-1]])
            nxt2 = np.concatenate([ring[2:], ring[:2]])
            edge = nxt - ring
            elen = np.hypot(edge[:, 0], edge[:, 1]) + 1e-12
            dev_prev = np.abs(edge[:, 0] * (prev[:, 1] - ring[:, 1])
                              - edge[:, 1] * (prev[:, 0] - ring[:, 0])) / elen
            dev_next = np.abs(edge[:, 0] * (nxt2[:, 1] - ring[:, 1])
                              - edge[:, 1] * (nxt2[:, 0] - ring[:, 0])) / elen
            flat = (dev_prev < 2.0) & (dev_next < 2.0)
            if unbounded.any():
                mids = 0.5 * (ring + nxt)
                areas = np.where(unbounded, area, areas)
                apexes = np.where(unbounded[:, None], mids, apexes)
            areas[flat] = 0.0
            if settled or suppressed:
                for e in range(n):
                    if edge_key(ring[e], ring[(e + 1) % n]) in settled:
                        areas[e] = 0.0
                    elif (round(ring[e][0], 3), round(ring[e][1], 3)) in suppressed:
                        areas[e] = 0.0

            total_pot = float(areas.sum())
            if area / (area + total_pot) > p.conv_thresh:
                return True

            best_edge = int(np.argmax(areas))
            if areas[best_edge] <= 0.0:
                return False  # nothing can grow and the ratio never converged
            apex = apexes[best_edge]
            direction = apex - tmp.center
            norm = float(math.hypot(direction[0], direction[1]))
            if norm < 1e-9:
                return False
            direction = direction / norm
            cap = max(32, int(math.ceil(4.0 * norm)))
            found = self._scan_three_borders(view, tmp.center, direction, cap,
                                             tmp.reference_red, tmp.reference_green,
                                             tmp.reference_black,
                                             first_len=int(math.ceil(1.4 * norm)) + 12)
            if found is None:
                return False
            rg_pt, gb_pt, bw_pt, _ = found

            new_bw = _insert_ring_point(tmp.ring_bw, bw_pt, tmp.center)
            if new_bw is None:
                suppressed.add((round(ring[best_edge][0], 3), round(ring[best_edge][1], 3)))
                continue
            # A new point on the grown edge's own line means that edge already
            # lay on the border; freeze the two halves so the greedy stops
            # splitting confirmed straight segments.
            ea = ring[best_edge]
            eb = ring[(best_edge + 1) % n]
            span = math.hypot(eb[0] - ea[0], eb[1] - ea[1])
            if span > 1e-9 and abs(_cross(ea, eb, bw_pt)) / span < 2.0:
                settled.add(edge_key(ea, bw_pt))
                settled.add(edge_key(bw_pt, eb))
            tmp.ring_bw = new_bw
            suppressed.clear()
            for attr, pt in (("ring_rg", rg_pt), ("ring_gb", gb_pt)):
                current = getattr(tmp, attr)
                updated = _insert_ring_point(current, pt, tmp.center)
                if updated is not None:
                    setattr(tmp, attr, updated)
        return False

    # ------------------------------------------------------------------
    # stage 4: quad fit and corner refinement

    def _poly_to_quad(self, view: _LabView, tmp: TmpDet) -> np.ndarray | None:
        p = self.params
        try:
            quad = fit_quad(tmp.ring_bw)
        except GeometryError:
            return None
        edges = np.concatenate([quad[1:], quad[:1]]) - quad
        mean_edge = float(np.mean(np.hypot(edges[:, 0], edges[:, 1])))
        radius = int(min(max(round(p.patch_scale * mean_edge), 2), 15))

        refined = []
        margin = radius + 2
        for corner in quad:
            c_col = int(math.floor(corner[0]))
            c_row = int(math.floor(corner[1]))
            r0 = max(c_row - margin, 0)
            r1 = min(c_row + margin, view.h - 1)
            c0 = max(c_col - margin, 0)
            c1 = min(c_col + margin, view.w - 1)
            if r0 > r1 or c0 > c1:
                return None
            luma = view.luma_window(r0, r1, c0, c1)
            try:
                best = corner_score_patch(luma, (corner[0] - c0, corner[1] - r0), radius)
            except GeometryError:
                return None
            refined.append(best + (c0, r0))

        out = order_quad(np.array(refined))
        if not is_convex_ccw(out) or polygon_area(out) <= 0:
            return None
        return out

    # ------------------------------------------------------------------
    # stage 5: decode

    def _decode(self, view: _LabView, quad: np.ndarray) -> tuple[int, int] | None:
        p = self.params
        try:
            h = estimate_homography(self._canonical, quad)
            pts = project(h, self._cells)
        except GeometryError:
            return None
        cols = np.floor(pts[:, 0]).astype(np.intp)
        rows = np.floor(pts[:, 1]).astype(np.intp)
        if (cols < 0).any() or (cols >= view.w).any() or (rows < 0).any() or (rows >= view.h).any():
            return None
        b = view.lab_at(rows, cols)[:, 2].astype(np.int32)

        bits = np.zeros(16, dtype=np.int64)
        for indices in (self._red_cells, self._green_cells):
            vals = b[indices]
            lo, hi = int(vals.min()), int(vals.max())
            if hi - lo < p.min_decode_contrast:
                return None
            mid = (hi + lo) / 2.0
            bits[indices] = vals > mid

        word = 0
        for i in range(16):
            word |= int(bits[i]) << (15 - i)
        return decode_bits(word, self.table)


def detect(image: np.ndarray, params: DetectorParams | None = None,
           table: SignatureTable | None = None) -> FrameResult:
    """One-shot detection with the built-in family."""
    return ChromaTagDetector(table=table, params=params).detect(image)
