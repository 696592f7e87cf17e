import numpy as np
import pytest

from chromatag import colorspace as cs
from chromatag.taggen import DEFAULT_PALETTE

from reference_lab import scaled as reference_scaled


def test_neutral_gray_on_achromatic_axis():
    p = cs.rgb_to_lab((128, 128, 128))
    assert p.a == 128
    assert p.b == 128


def test_white_point():
    p = cs.rgb_to_lab((255, 255, 255))
    assert (p.l, p.a, p.b) == (255, 128, 128)


def test_pure_red_against_independent_reference():
    got = cs.rgb_to_lab((255, 0, 0))
    want = reference_scaled(255, 0, 0)
    assert (got.l, got.a, got.b) == want
    assert got.a > 190


def test_random_pixels_match_reference():
    rng = np.random.default_rng(42)
    for r, g, b in rng.integers(0, 256, size=(200, 3)):
        got = cs.rgb_to_lab((int(r), int(g), int(b)))
        want = reference_scaled(int(r), int(g), int(b))
        assert (got.l, got.a, got.b) == want, (r, g, b)


def test_gray_axis_invariants():
    prev_l = -1
    for v in range(256):
        p = cs.rgb_to_lab((v, v, v))
        assert 127 <= p.a <= 129
        assert 127 <= p.b <= 129
        assert p.l >= prev_l
        prev_l = p.l


def test_conversion_is_pure():
    a = cs.rgb_to_lab((37, 201, 95))
    b = cs.rgb_to_lab((37, 201, 95))
    assert a == b


def test_out_of_range_pixel_rejected():
    with pytest.raises(ValueError):
        cs.RgbPixel(300, 0, 0)


class TestLabTable:
    def test_matches_direct_path(self):
        table = cs.LabTable()
        p = (12, 200, 77)
        assert table.get(p) == cs.rgb_to_lab(p)

    def test_second_call_memoized(self):
        table = cs.LabTable()
        table.get((1, 2, 3))
        misses = table.misses
        table.get((1, 2, 3))
        assert table.misses == misses
        assert table.hits >= 1

    def test_exhaustive_random_equality(self):
        table = cs.LabTable()
        rng = np.random.default_rng(7)
        px = rng.integers(0, 256, size=(10_000, 3), dtype=np.uint8)
        assert np.array_equal(table.convert(px), cs.rgb_to_lab_array(px))
        # and again through the warm table
        assert np.array_equal(table.convert(px), cs.rgb_to_lab_array(px))

    def test_channel_select(self):
        table = cs.LabTable()
        rng = np.random.default_rng(3)
        px = rng.integers(0, 256, size=(500, 3), dtype=np.uint8)
        assert np.array_equal(table.convert(px, channel=1), table.convert(px)[:, 1])

    def test_shared_default_table(self):
        assert cs.lab_lut_get((9, 9, 9)) == cs.rgb_to_lab((9, 9, 9))


def test_a_diff():
    p = cs.LabPixel(0, 200, 0)
    q = cs.LabPixel(0, 100, 0)
    assert cs.a_diff(p, q) == 100
    assert cs.a_diff(q, p) == -100
    assert cs.a_diff(p, p) == 0


def test_palette_red_green_a_diff_exceeds_trigger():
    red = cs.rgb_to_lab(DEFAULT_PALETTE.red0)
    green = cs.rgb_to_lab(DEFAULT_PALETTE.green0)
    assert cs.a_diff(red, green) > 25
