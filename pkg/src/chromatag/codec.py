"""Code-family management: cell layout, validity filtering, rotation table, decoding.

A tag code is a 16-bit word over a 4x4 cell grid. The central 2x2 cells are
rendered in the red shades, the surrounding 12-cell ring in the green shades.
Decoding clusters the sampled blue-yellow values per region around the
midpoint of that region's min and max, which only works when both regions
contain at least one 0 and one 1 bit; codes that do not satisfy this are
filtered out of the family.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

log = logging.getLogger(__name__)

GRID_SIDE = 4
WORD_BITS = GRID_SIDE * GRID_SIDE

RED = "RED"
GREEN = "GREEN"


class FamilyExhaustedError(ValueError):
    """Raised when filtering removes every code from a family."""


@dataclass(frozen=True)
class TagLayout:
    """Mapping between word bits, grid cells, and color regions.

    Bit ``i`` (counting from the most significant bit of the 16-bit word)
    lives at cell ``(i // 4, i % 4)``. The central 2x2 cells form the RED
    region, the outer 12-cell ring the GREEN region.
    """

    grid_side: int = GRID_SIDE

    def cell_region(self, row: int, col: int) -> str:
        return RED if row in (1, 2) and col in (1, 2) else GREEN

    def bit_index(self, row: int, col: int) -> int:
        """Bit position (shift amount) of cell (row, col) in the word."""
        return WORD_BITS - 1 - (row * self.grid_side + col)

    def cell_bit(self, code: int, row: int, col: int) -> int:
        return (code >> self.bit_index(row, col)) & 1

    def region_mask(self, region: str) -> int:
        mask = 0
        for row in range(self.grid_side):
            for col in range(self.grid_side):
                if self.cell_region(row, col) == region:
                    mask |= 1 << self.bit_index(row, col)
        return mask


DEFAULT_LAYOUT = TagLayout()

_RED_MASK = DEFAULT_LAYOUT.region_mask(RED)
_GREEN_MASK = DEFAULT_LAYOUT.region_mask(GREEN)


@dataclass(frozen=True)
class TagFamily:
    """An ordered, filtered list of codes. List position is the tag ID."""

    name: str
    codes: tuple[int, ...]
    min_hamming: int
    layout: TagLayout = field(default=DEFAULT_LAYOUT)

    def __len__(self) -> int:
        return len(self.codes)


def _region_bimodal(code: int, mask: int) -> bool:
    region_bits = code & mask
    return region_bits != 0 and region_bits != mask


def filter_family(raw_codes: list[int], layout: TagLayout = DEFAULT_LAYOUT,
                  name: str = "family") -> TagFamily:
    """Keep only codes whose RED and GREEN regions both contain a 0 and a 1.

    IDs are re-indexed densely over the surviving codes, in input order.
    Raises :class:`FamilyExhaustedError` if nothing survives.
    """
    if not raw_codes:
        raise FamilyExhaustedError("empty code list")
    red_mask = layout.region_mask(RED)
    green_mask = layout.region_mask(GREEN)
    kept = [c for c in raw_codes
            if _region_bimodal(c, red_mask) and _region_bimodal(c, green_mask)]
    if not kept:
        raise FamilyExhaustedError(f"no code in {name!r} survives the two-shades filter")
    return TagFamily(name=name, codes=tuple(kept), min_hamming=_min_hamming(kept),
                     layout=layout)


def _min_hamming(codes: list[int]) -> int:
    best = WORD_BITS
    for i in range(len(codes)):
        for j in range(i + 1, len(codes)):
            best = min(best, bin(codes[i] ^ codes[j]).count("1"))
    return best


def rotate90(code: int, layout: TagLayout = DEFAULT_LAYOUT) -> int:
    """Rotate the cell grid 90 degrees clockwise; cell (0,0) moves to (0,3)."""
    side = layout.grid_side
    out = 0
    for row in range(side):
        for col in range(side):
            src = layout.cell_bit(code, side - 1 - col, row)
            out |= src << layout.bit_index(row, col)
    return out


@dataclass(frozen=True)
class SignatureTable:
    """Exact-match lookup from any rotation of a family code to (id, rotation)."""

    family: TagFamily
    entries: dict[int, tuple[int, int]]

    def __len__(self) -> int:
        return len(self.entries)


def build_signature_table(family: TagFamily) -> SignatureTable:
    """Precompute all four rotations of every family code.

    If two distinct IDs collide on any key, the later ID is dropped from the
    family with a warning (the surviving family is re-indexed densely).
    """
    entries: dict[int, tuple[int, int]] = {}
    kept_codes: list[int] = []
    for code in family.codes:
        new_id = len(kept_codes)
        rotations = []
        word = code
        collision = False
        for rot in range(4):
            if word in entries:
                collision = True
                break
            rotations.append((word, rot))
            word = rotate90(word, family.layout)
        if collision:
            warnings.warn(
                f"code {code:#06x} collides with an earlier signature; dropped",
                stacklevel=2,
            )
            continue
        for word, rot in rotations:
            entries[word] = (new_id, rot)
        kept_codes.append(code)
    kept_family = TagFamily(name=family.name, codes=tuple(kept_codes),
                            min_hamming=family.min_hamming, layout=family.layout)
    return SignatureTable(family=kept_family, entries=entries)


def decode_bits(bits: int, table: SignatureTable) -> tuple[int, int] | None:
    """Exact-match lookup; returns (id, rotation) or None. No error correction."""
    return table.entries.get(bits & 0xFFFF)


def load_code_file(path: str | Path) -> list[int]:
    """Read a code file: one hexadecimal word per line, ``#`` comments allowed."""
    codes: list[int] = []
    for raw_line in Path(path).read_text().splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        codes.append(int(line, 16))
    return codes


def builtin_family(name: str = "tag16h5") -> TagFamily:
    """Load and filter a family shipped with the package."""
    ref = resources.files("chromatag.data") / f"{name}.codes"
    with resources.as_file(ref) as path:
        raw = load_code_file(path)
    return filter_family(raw, name=name)


def builtin_signature_table(name: str = "tag16h5") -> SignatureTable:
    return build_signature_table(builtin_family(name))
