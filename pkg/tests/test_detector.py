import numpy as np
import pytest

from chromatag import detector, taggen
from chromatag.detector import ChromaTagDetector, DetectorParams, TmpDet
from chromatag.geometry import quad_iou


def paste(frame, image, top, left):
    frame = frame.copy()
    frame[top:top + image.shape[0], left:left + image.shape[1]] = image
    return frame


GRAY = np.full((480, 752, 3), 128, np.uint8)


class TestDetect:
    def test_uniform_gray_frame(self, det):
        result = det.detect(GRAY)
        assert result.detections == []
        assert result.seeds == 0

    def test_single_centered_tag(self, det, tagged_frame):
        frame, gt = tagged_frame
        result = det.detect(frame)
        assert len(result.detections) == 1
        d = result.detections[0]
        assert (d.id, d.rotation) == (0, 0)
        assert quad_iou(d.quad, gt) > 0.9

    def test_two_tags_distinct_ids(self, det, family):
        img_a, _ = taggen.render_tag(family, 3, 0, 12)
        img_b, _ = taggen.render_tag(family, 11, 2, 12)
        frame = paste(paste(GRAY, img_a, 60, 80), img_b, 240, 460)
        result = det.detect(frame)
        assert sorted(d.id for d in result.detections) == [3, 11]

    def test_detection_bboxes_disjoint(self, det, family):
        img_a, _ = taggen.render_tag(family, 3, 0, 12)
        img_b, _ = taggen.render_tag(family, 11, 2, 12)
        frame = paste(paste(GRAY, img_a, 60, 80), img_b, 240, 460)
        result = det.detect(frame)
        boxes = []
        for d in result.detections:
            x, y = d.quad[:, 0], d.quad[:, 1]
            boxes.append((x.min(), y.min(), x.max(), y.max()))
        (ax0, ay0, ax1, ay1), (bx0, by0, bx1, by1) = boxes
        assert ax1 < bx0 or bx1 < ax0 or ay1 < by0 or by1 < ay0

    def test_deterministic_content(self, det, tagged_frame):
        frame, _ = tagged_frame
        r1 = det.detect(frame)
        r2 = det.detect(frame)
        assert len(r1.detections) == len(r2.detections)
        for d1, d2 in zip(r1.detections, r2.detections):
            assert (d1.id, d1.rotation) == (d2.id, d2.rotation)
            assert np.array_equal(d1.quad, d2.quad)
            assert np.array_equal(d1.center, d2.center)
        assert r1.stage_failures == r2.stage_failures
        assert r1.seeds == r2.seeds

    def test_photometric_shift_invariance(self, det, family):
        base = paste(np.full((320, 320, 3), 110, np.uint8),
                     taggen.render_tag(family, 4, 1, 16)[0], 96, 96)
        reference = {(d.id, d.rotation) for d in det.detect(base).detections}
        assert reference == {(4, 1)}
        for shift in (-12, 10):
            shifted = np.clip(base.astype(np.int16) + shift, 0, 255).astype(np.uint8)
            got = {(d.id, d.rotation) for d in det.detect(shifted).detections}
            assert got == reference

    def test_small_image_rejected(self, det):
        with pytest.raises(ValueError):
            det.detect(np.zeros((16, 16, 3), np.uint8))

    def test_stage_ordering_no_time_after_failure(self, table):
        # a red poster with no green anywhere: every seed dies in initial_scan
        d = ChromaTagDetector(table)
        frame = np.full((240, 320, 3), 128, np.uint8)
        frame[100:140, 100:220] = taggen.DEFAULT_PALETTE.red1
        result = d.detect(frame)
        assert result.detections == []
        assert result.seeds > 0
        assert result.stage_failures["initial_scan"] == result.seeds
        for stage in ("build_polygon", "poly_to_quad", "decode"):
            assert result.stage_failures[stage] == 0
            assert result.stage_times_us[stage] == 0.0

    def test_failure_counts_sum_to_abandoned_seeds(self, det, family):
        img, _ = taggen.render_tag(family, 6, 0, 16)
        frame = paste(GRAY, img, 150, 300)
        result = det.detect(frame)
        abandoned = result.seeds - len(result.detections)
        assert sum(result.stage_failures.values()) == abandoned


class TestInitialScan:
    def test_seed_at_exact_center(self, det, family):
        image, _ = taggen.render_tag(family, 0, 0, 16)
        frame = paste(GRAY, image, 0, 0)
        view = det._view(frame)
        tmp = det._initial_scan(view, 64, 64)
        assert tmp is not None
        assert np.allclose(tmp.center, (64.5, 64.5), atol=1.0)
        dists = np.hypot(*(tmp.ring_rg - tmp.center).T)
        assert dists.max() - dists.min() <= 1.0 + 1e-9

    def test_off_center_seed_converges(self, det, family):
        image, _ = taggen.render_tag(family, 0, 0, 16)
        frame = paste(GRAY, image, 100, 200)
        view = det._view(frame)
        # seed at the top-left corner of the red region
        tmp = det._initial_scan(view, 100 + 48, 200 + 48)
        assert tmp is not None
        true_center = np.array([200 + 64.0, 100 + 64.0])
        assert np.hypot(*(tmp.center - true_center)) < det.params.step

    def test_red_poster_without_green_fails(self, det):
        frame = GRAY.copy()
        frame[200:280, 300:452] = taggen.DEFAULT_PALETTE.red0
        view = det._view(frame)
        assert det._initial_scan(view, 240, 376) is None

    def test_rings_nested(self, det, tagged_frame):
        frame, _ = tagged_frame
        view = det._view(frame)
        tmp = det._initial_scan(view, 232, 360)
        assert tmp is not None
        r_rg = np.hypot(*(tmp.ring_rg - tmp.center).T).max()
        r_gb = np.hypot(*(tmp.ring_gb - tmp.center).T).min()
        r_bw = np.hypot(*(tmp.ring_bw - tmp.center).T).min()
        assert r_rg < r_gb < r_bw


class TestBuildPolygon:
    def test_frontal_area_close_to_truth(self, det, tagged_frame):
        frame, gt = tagged_frame
        view = det._view(frame)
        tmp = det._initial_scan(view, 232, 360)
        assert det._build_polygon(view, tmp)
        from chromatag.geometry import polygon_area
        true_area = abs(polygon_area(gt))
        assert abs(polygon_area(tmp.ring_bw) - true_area) / true_area < 0.05

    def test_warped_vertices_near_true_border(self, det, family, backgrounds):
        from chromatag import synth
        from chromatag.geometry import polygon_area
        cam = synth.CameraModel()
        pose = synth.ScenePose(viewing_angle=40.0, in_plane_rotation=25.0,
                               distance=24.0, tilt_azimuth=30.0)
        h = synth.pose_to_homography(pose, cam)
        tag, _ = taggen.render_tag(family, 8, 0, 32)
        fr = synth.warp_composite(tag, backgrounds[0], h, synth.NEUTRAL_PRESET)
        view = det._view(fr.image)
        result = det.detect(fr.image)
        assert result.detections
        gt = fr.gt_quad

        def point_to_quad_distance(p):
            best = np.inf
            for k in range(4):
                a, b = gt[k], gt[(k + 1) % 4]
                ab = b - a
                t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0, 1)
                best = min(best, float(np.hypot(*(a + t * ab - p))))
            return best

        p = det.params
        grid = view.image[::p.step, ::p.step]
        a_grid = view.convert_a(grid).reshape(grid.shape[:2])
        trig = np.argwhere((a_grid[:, 1:] - a_grid[:, :-1]) > p.a_diff_thresh)
        ri, ci = trig[0]
        tmp = det._initial_scan(view, int(ri) * p.step, int(ci + 1) * p.step)
        assert tmp is not None
        assert det._build_polygon(view, tmp)
        for vertex in tmp.ring_bw:
            assert point_to_quad_distance(vertex) <= 2.0

    def test_truncated_tag_fails(self, det, family):
        image, _ = taggen.render_tag(family, 0, 0, 16)
        frame = GRAY.copy()
        frame[200:328, 700:752] = image[:, :52]  # right part cut off
        result = det.detect(frame)
        assert all(d.id != 0 or quad_iou(d.quad, np.array([
            (716, 216), (812, 216), (812, 312), (716, 312)], dtype=float)) < 0.5
            for d in result.detections)
        assert result.detections == []


class TestPolyToQuad:
    def test_frontal_corners_within_one_pixel(self, det, tagged_frame):
        frame, gt = tagged_frame
        result = det.detect(frame)
        quad = result.detections[0].quad
        errors = np.hypot(*(quad - gt).T)
        assert errors.max() <= 1.0

    def test_sixty_degree_corners_within_three_pixels(self, det, family, backgrounds):
        from chromatag import synth
        cam = synth.CameraModel()
        rng = np.random.default_rng(5)
        checked = 0
        for azimuth in (0.0, 70.0, 200.0):
            pose_kwargs = dict(viewing_angle=60.0, tilt_azimuth=azimuth,
                               in_plane_rotation=float(rng.uniform(0, 360)))
            pose = synth._solve_distance(90.0, pose_kwargs, cam)
            h = synth.pose_to_homography(pose, cam)
            tag, _ = taggen.render_tag(family, 1, 0, 32)
            fr = synth.warp_composite(tag, backgrounds[1], h, synth.NEUTRAL_PRESET)
            result = det.detect(fr.image)
            hits = [d for d in result.detections if d.id == 1]
            if not hits:
                continue
            best = min(
                np.hypot(*(np.roll(hits[0].quad, s, axis=0) - fr.gt_quad).T).max()
                for s in range(4))
            assert best <= 3.0
            checked += 1
        assert checked >= 2

    def test_triangular_ring_fails(self, det, tagged_frame):
        frame, _ = tagged_frame
        view = det._view(frame)
        tmp = TmpDet(
            reference_red=None, reference_green=None, reference_black=None,
            center=np.array([376.0, 240.0]),
            ring_rg=np.empty((0, 2)), ring_gb=np.empty((0, 2)),
            ring_bw=np.array([(350.0, 220.0), (400.0, 220.0), (376.0, 265.0)]),
            seed=(0, 0),
        )
        assert det._poly_to_quad(view, tmp) is None


class TestDecode:
    def test_all_ids_and_rotations(self, det, family):
        rng = np.random.default_rng(0)
        ids = rng.choice(len(family.codes), size=6, replace=False)
        for tag_id in ids:
            for rotation in range(4):
                image, _ = taggen.render_tag(family, int(tag_id), rotation, 16)
                frame = paste(np.full((192, 192, 3), 128, np.uint8), image, 32, 32)
                result = det.detect(frame)
                assert [(d.id, d.rotation) for d in result.detections] == \
                    [(int(tag_id), rotation)]

    def test_gray_region_fails_contrast(self, det):
        view = det._view(GRAY)
        quad = np.array([(100.0, 100.0), (200.0, 100.0), (200.0, 200.0), (100.0, 200.0)])
        assert det._decode(view, quad) is None

    def test_every_detection_id_is_in_family(self, det, family, tagged_frame):
        frame, _ = tagged_frame
        result = det.detect(frame)
        for d in result.detections:
            assert 0 <= d.id < len(family.codes)


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            DetectorParams(step=0).validate()
        with pytest.raises(ValueError):
            DetectorParams(conv_thresh=1.5).validate()
        with pytest.raises(ValueError):
            DetectorParams(border_run=0).validate()

    def test_detect_function_wrapper(self, tagged_frame):
        frame, _ = tagged_frame
        result = detector.detect(frame)
        assert len(result.detections) == 1
