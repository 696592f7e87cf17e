import warnings

import numpy as np
import pytest

from chromatag import codec

# Frozen regression constants for the shipped 16h5-derived family, verified
# by the independent brute force below.
EXPECTED_VALID = 28
EXPECTED_REMOVED = {0x7F6B, 0x380B}
EXPECTED_TABLE_SIZE = 4 * EXPECTED_VALID


def brute_force_filter(codes):
    """Independent two-shades filter: explicit per-cell loops."""
    layout = codec.DEFAULT_LAYOUT
    kept = []
    for word in codes:
        red_bits = []
        green_bits = []
        for row in range(4):
            for col in range(4):
                bit = (word >> (15 - (4 * row + col))) & 1
                if row in (1, 2) and col in (1, 2):
                    red_bits.append(bit)
                else:
                    green_bits.append(bit)
        if 0 in red_bits and 1 in red_bits and 0 in green_bits and 1 in green_bits:
            kept.append(word)
    return kept


def brute_force_rotate(word):
    out = 0
    for row in range(4):
        for col in range(4):
            src_bit = (word >> (15 - (4 * (3 - col) + row))) & 1
            out |= src_bit << (15 - (4 * row + col))
    return out


class TestFilterFamily:
    def test_all_ones_removed(self):
        survivor = (1 << 10) | 1  # one red bit and one green bit set
        fam = codec.filter_family([0xFFFF, survivor])
        assert 0xFFFF not in fam.codes
        assert survivor in fam.codes

    def test_mixed_regions_kept(self):
        # red cells {0,1,1,0}, green cells mixed
        word = (1 << 9) | (1 << 6) | (1 << 15) | 0
        fam = codec.filter_family([word])
        assert fam.codes == (word,)

    def test_survivor_count_matches_brute_force(self, family):
        from importlib import resources
        ref = resources.files("chromatag.data") / "tag16h5.codes"
        with resources.as_file(ref) as path:
            raw = codec.load_code_file(path)
        assert len(raw) == 30
        brute = brute_force_filter(raw)
        assert tuple(brute) == family.codes
        assert len(family) == EXPECTED_VALID
        assert set(raw) - set(family.codes) == EXPECTED_REMOVED

    def test_idempotent(self, family):
        again = codec.filter_family(list(family.codes))
        assert again.codes == family.codes

    def test_exhausted_family_raises(self):
        with pytest.raises(codec.FamilyExhaustedError):
            codec.filter_family([0x0000, 0xFFFF])
        with pytest.raises(codec.FamilyExhaustedError):
            codec.filter_family([])


class TestRotate90:
    def test_rotationally_symmetric_fixed_point(self):
        # all cells of each concentric orbit equal: center ring 1s, outer 0s
        word = codec.DEFAULT_LAYOUT.region_mask(codec.RED)
        assert codec.rotate90(word) == word

    def test_four_rotations_identity(self):
        rng = np.random.default_rng(0)
        for word in rng.integers(0, 1 << 16, size=200):
            w = int(word)
            out = w
            for _ in range(4):
                out = codec.rotate90(out)
            assert out == w

    def test_corner_bit_moves_clockwise(self):
        layout = codec.DEFAULT_LAYOUT
        word = 1 << layout.bit_index(0, 0)
        assert codec.rotate90(word) == 1 << layout.bit_index(0, 3)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for word in rng.integers(0, 1 << 16, size=500):
            assert codec.rotate90(int(word)) == brute_force_rotate(int(word))

    def test_is_permutation(self):
        rng = np.random.default_rng(2)
        words = rng.integers(0, 1 << 16, size=1000)
        rotated = {codec.rotate90(int(w)) for w in set(words.tolist())}
        assert len(rotated) == len(set(words.tolist()))


class TestSignatureTable:
    def test_single_code_gives_four_entries(self):
        fam = codec.filter_family([0x231B])
        table = codec.build_signature_table(fam)
        assert len(table) == 4

    def test_rotation_lookup(self, family, table):
        code = family.codes[3]
        assert codec.decode_bits(codec.rotate90(code), table) == (3, 1)

    def test_full_family_table_size(self, table):
        assert len(table) == EXPECTED_TABLE_SIZE
        assert len(table.family) == EXPECTED_VALID

    def test_collision_drops_later_id(self):
        base = 0x231B
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            fam = codec.TagFamily("clash", (base, codec.rotate90(base)), 0)
            table = codec.build_signature_table(fam)
        assert len(table.family) == 1
        assert len(table) == 4
        assert any("collides" in str(w.message) for w in caught)


class TestDecodeBits:
    def test_every_code_and_rotation(self, family, table):
        for tag_id, code in enumerate(family.codes):
            word = code
            for rot in range(4):
                assert codec.decode_bits(word, table) == (tag_id, rot)
                word = codec.rotate90(word)

    def test_complement_absent(self, family, table):
        comp = (~family.codes[0]) & 0xFFFF
        assert comp not in table.entries
        assert codec.decode_bits(comp, table) is None

    def test_random_hit_rate(self, table):
        rng = np.random.default_rng(3)
        words = rng.integers(0, 1 << 16, size=20_000)
        hits = sum(codec.decode_bits(int(w), table) is not None for w in words)
        expected = len(table) / 65536 * len(words)
        sigma = (len(words) * (len(table) / 65536)) ** 0.5
        assert abs(hits - expected) < 6 * sigma + 5


def test_code_file_parsing(tmp_path):
    path = tmp_path / "fam.codes"
    path.write_text("# comment\n0x1234  # trailing\n\nabcd\n")
    assert codec.load_code_file(path) == [0x1234, 0xABCD]
