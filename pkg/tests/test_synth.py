import math
import warnings

import numpy as np
import pytest

from chromatag import synth, taggen
from chromatag.geometry import polygon_area, project, quad_iou


class TestPoseToHomography:
    def test_frontal_view_is_axis_aligned_square(self):
        cam = synth.CameraModel()
        h = synth.pose_to_homography(synth.ScenePose(distance=40.0), cam)
        quad = project(h, taggen.canonical_border_corners())
        assert np.allclose(quad[0, 1], quad[1, 1])   # top edge horizontal
        assert np.allclose(quad[1, 0], quad[2, 0])   # right edge vertical
        side_a = np.hypot(*(quad[1] - quad[0]))
        side_b = np.hypot(*(quad[2] - quad[1]))
        assert side_a == pytest.approx(side_b, rel=1e-9)
        assert polygon_area(quad) > 0  # orientation preserved (no mirroring)

    def test_sixty_degree_edge_ratio_matches_pinhole(self):
        # Tilt about a fixed axis; edges at constant offset along the tilt
        # direction lie at constant depth d -+ 3 sin(va), so the ratio of
        # their projected lengths is the inverse depth ratio.
        cam = synth.CameraModel()
        d = 40.0
        va = math.radians(60.0)
        pose = synth.ScenePose(viewing_angle=60.0, distance=d, tilt_azimuth=0.0)
        h = synth.pose_to_homography(pose, cam)
        quad = project(h, taggen.canonical_border_corners())
        # Azimuth 0 tilts along the canonical u axis, so the left and right
        # border edges (corner pairs 3-0 and 1-2) each lie at constant depth.
        right = float(np.hypot(*(quad[2] - quad[1])))
        left = float(np.hypot(*(quad[0] - quad[3])))
        near_over_far = max(left, right) / min(left, right)
        expected = (d + 3 * math.sin(va)) / (d - 3 * math.sin(va))
        assert near_over_far == pytest.approx(expected, rel=1e-6)

    def test_double_distance_halves_tag_size(self):
        cam = synth.CameraModel()
        sizes = []
        for dist in (30.0, 60.0):
            h = synth.pose_to_homography(synth.ScenePose(distance=dist), cam)
            quad = project(h, taggen.canonical_border_corners())
            sizes.append(math.sqrt(abs(polygon_area(quad))))
        assert sizes[0] / sizes[1] == pytest.approx(2.0, rel=0.01)

    def test_behind_camera_rejected(self):
        with pytest.raises(ValueError):
            synth.ScenePose(distance=-5.0)

    def test_ground_truth_is_exact_projection(self, backgrounds, family):
        cam = synth.CameraModel()
        pose = synth.ScenePose(viewing_angle=30.0, in_plane_rotation=45.0, distance=30.0)
        h = synth.pose_to_homography(pose, cam)
        tag, _ = taggen.render_tag(family, 0, 0, 16)
        frame = synth.warp_composite(tag, backgrounds[0], h)
        assert np.array_equal(frame.gt_quad, project(h, taggen.canonical_border_corners()))


class TestWarpComposite:
    def test_identity_placement_is_byte_exact(self, family):
        px = 16
        tag, _ = taggen.render_tag(family, 3, 0, px)
        placement = np.array([[px, 0.0, 4.0 * px], [0.0, px, 4.0 * px], [0.0, 0.0, 1.0]])
        background = np.full((200, 200, 3), 99, np.uint8)
        frame = synth.warp_composite(tag, background, placement, synth.NEUTRAL_PRESET)
        assert np.array_equal(frame.image[1:127, 1:127], tag[1:127, 1:127])

    def test_neutral_preset_is_identity(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (60, 80, 3), dtype=np.uint8)
        out = synth.apply_photometrics(img, synth.NEUTRAL_PRESET, seed=1)
        assert np.array_equal(out, img)

    def test_out_of_bounds_rejected(self, family):
        tag, _ = taggen.render_tag(family, 0, 0, 16)
        placement = np.array([[16.0, 0.0, 0.0], [0.0, 16.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(synth.SynthError):
            synth.warp_composite(tag, np.zeros((50, 50, 3), np.uint8), placement)

    def test_detector_corners_close_on_neutral_warp(self, det, family, backgrounds):
        cam = synth.CameraModel()
        pose = synth._solve_distance(
            100.0, dict(viewing_angle=20.0, in_plane_rotation=30.0, tilt_azimuth=10.0), cam)
        h = synth.pose_to_homography(pose, cam)
        tag, _ = taggen.render_tag(family, 6, 0, 32)
        frame = synth.warp_composite(tag, backgrounds[2], h, synth.NEUTRAL_PRESET)
        result = det.detect(frame.image)
        hits = [d for d in result.detections if d.id == 6]
        assert hits
        best = min(np.hypot(*(np.roll(hits[0].quad, s, axis=0) - frame.gt_quad).T).max()
                   for s in range(4))
        assert best <= 2.0

    def test_nwb_gains_still_decodable(self, det, family, backgrounds):
        cam = synth.CameraModel()
        pose = synth._solve_distance(
            110.0, dict(viewing_angle=10.0, in_plane_rotation=75.0, tilt_azimuth=0.0), cam)
        h = synth.pose_to_homography(pose, cam)
        tag, _ = taggen.render_tag(family, 14, 2, 32)
        frame = synth.warp_composite(tag, backgrounds[3], h,
                                     synth.DEFAULT_PRESETS["nwb"], seed=77)
        result = det.detect(frame.image)
        assert any(d.id == 14 and quad_iou(d.quad, frame.gt_quad) >= 0.5
                   for d in result.detections)

    def test_bayer_roundtrip_flag(self, family, backgrounds):
        preset = synth.PhotometricPreset("bayer", blur_sigma=0.5, bayer=True)
        cam = synth.CameraModel()
        pose = synth._solve_distance(
            120.0, dict(viewing_angle=0.0, in_plane_rotation=0.0, tilt_azimuth=0.0), cam)
        h = synth.pose_to_homography(pose, cam)
        tag, _ = taggen.render_tag(family, 0, 0, 32)
        frame = synth.warp_composite(tag, backgrounds[0], h, preset, seed=5)
        assert frame.image.shape == backgrounds[0].shape


class TestGenerateSweep:
    def test_grid_counting(self, family, backgrounds):
        spec = synth.SweepSpec(sizes=(80.0, 120.0), angles=(0.0, 20.0),
                               presets=(synth.DEFAULT_PRESETS["wb"],), ids_per_cell=5)
        frames, records = synth.generate_sweep(spec, family, backgrounds[:3], seed=1)
        assert len(frames) == 2 * 2 * 1 * 5
        assert len(records) == len(frames)

    def test_manifest_quads_valid_and_sizes_consistent(self, family, backgrounds):
        spec = synth.SweepSpec(sizes=(70.0, 140.0), angles=(0.0, 40.0),
                               presets=(synth.DEFAULT_PRESETS["wb"],), ids_per_cell=2)
        frames, records = synth.generate_sweep(spec, family, backgrounds[:2], seed=3)
        from chromatag.geometry import is_convex_ccw, order_quad
        for frame, record in zip(frames, records):
            quad = np.asarray(record["corners"])
            h, w = frame.image.shape[:2]
            assert quad[:, 0].min() >= 0 and quad[:, 0].max() <= w
            assert quad[:, 1].min() >= 0 and quad[:, 1].max() <= h
            assert is_convex_ccw(order_quad(quad))
            recomputed = math.sqrt(abs(polygon_area(quad)))
            assert abs(record["tag_size"] - recomputed) / recomputed < 0.02

    def test_deterministic(self, family, backgrounds):
        spec = synth.SweepSpec(sizes=(90.0,), angles=(10.0,),
                               presets=(synth.DEFAULT_PRESETS["nwb"],), ids_per_cell=3)
        f1, r1 = synth.generate_sweep(spec, family, backgrounds[:2], seed=9)
        f2, r2 = synth.generate_sweep(spec, family, backgrounds[:2], seed=9)
        assert r1 == r2
        for a, b in zip(f1, f2):
            assert np.array_equal(a.image, b.image)

    def test_infeasible_cell_skipped_with_warning(self, family, backgrounds):
        small_bg = backgrounds[0][:100, :100]
        spec = synth.SweepSpec(sizes=(400.0,), angles=(0.0,),
                               presets=(synth.DEFAULT_PRESETS["wb"],), ids_per_cell=1)
        cam = synth.CameraModel(width=100, height=100)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            frames, records = synth.generate_sweep(spec, family, [small_bg], seed=0, cam=cam)
        assert frames == []
        assert any("skipped" in str(w.message) for w in caught)
