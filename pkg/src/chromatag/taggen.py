"""Tag rendering: canonical geometry, the default palette, ground-truth corners.

Canonical tag frame: the tag spans 8x8 cell units centered on the origin.
Nested square regions by half-width: red code center out to +-1, green code
ring to +-2, black localization ring to +-3, white margin to +-4. The
black-white boundary square at +-3 is the localization border whose corners
every downstream consumer (decoder, homographies, ground truth) refers to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import GREEN, TagFamily, rotate90
from .colorspace import rgb_to_lab

Rgb = tuple[int, int, int]

RED_HALF = 1
GREEN_HALF = 2
BLACK_HALF = 3
WHITE_HALF = 4
TAG_CELLS = 2 * WHITE_HALF


@dataclass(frozen=True)
class TagPalette:
    """The six colors of a tag. Shade 1 of each hue encodes bit value 1."""

    red0: Rgb
    red1: Rgb
    green0: Rgb
    green1: Rgb
    black: Rgb
    white: Rgb

    def colors(self) -> tuple[Rgb, ...]:
        return (self.red0, self.red1, self.green0, self.green1, self.black, self.white)


# Found by scripts/find_palette.py: maximal within-region B-channel shade
# separation subject to the A-channel constraints validate_palette checks.
# The green band additionally sits less than the trigger threshold away from
# neutral so green-black boundaries never seed the detector.
DEFAULT_PALETTE = TagPalette(
    red0=(228, 54, 228),
    red1=(254, 0, 0),
    green0=(150, 236, 252),
    green1=(82, 120, 66),
    black=(0, 0, 0),
    white=(255, 255, 255),
)


def canonical_border_corners() -> np.ndarray:
    """Black-white boundary corners in cell units, CCW from top-left."""
    h = float(BLACK_HALF)
    return np.array([(-h, -h), (h, -h), (h, h), (-h, h)])


def canonical_cell_centers() -> np.ndarray:
    """The 16 code cell centers in cell units, bit order (row-major from MSB)."""
    coords = []
    for row in range(4):
        for col in range(4):
            coords.append((col - 1.5, row - 1.5))
    return np.array(coords)


def validate_palette(palette: TagPalette) -> list[str]:
    """Check every palette invariant numerically; returns violated constraints."""
    lab = {name: rgb_to_lab(c) for name, c in zip(
        ("red0", "red1", "green0", "green1", "black", "white"), palette.colors())}
    violations = []

    for hue in ("red", "green"):
        p0, p1 = lab[hue + "0"], lab[hue + "1"]
        if abs(p0.a - p1.a) >= 10:
            violations.append(f"|a({hue}0)-a({hue}1)| < 10")
        if abs(p0.b - p1.b) <= 40:
            violations.append(f"|b({hue}0)-b({hue}1)| > 40")

    sep = min(abs(lab[r].a - lab[g].a)
              for r in ("red0", "red1") for g in ("green0", "green1"))
    if sep <= 40:
        violations.append("min |a(red)-a(green)| > 40")

    for name in ("black", "white"):
        if abs(lab[name].a - 128) > 6:
            violations.append(f"a({name}) within 128+-6")
    if abs(lab["black"].l - lab["white"].l) <= 100:
        violations.append("|l(black)-l(white)| > 100")
    return violations


def render_tag(family: TagFamily, tag_id: int, rotation: int = 0,
               px_per_cell: int = 16, palette: TagPalette = DEFAULT_PALETTE,
               ) -> tuple[np.ndarray, np.ndarray]:
    """Render one tag; returns (RGB image, ground-truth border corners).

    The image is ``8 * px_per_cell`` pixels square. ``rotation`` bakes the
    rotated code into the painted cells (the raster itself stays axis
    aligned), so the returned corners are exact for any rotation. Corners are
    the black-white boundary square, CCW from top-left, in corner-anchored
    pixel coordinates.
    """
    if not 0 <= tag_id < len(family.codes):
        raise ValueError(f"tag id {tag_id} outside family of {len(family.codes)}")
    if rotation not in (0, 1, 2, 3):
        raise ValueError("rotation must be 0..3")
    if px_per_cell < 2:
        raise ValueError("px_per_cell must be >= 2")

    code = family.codes[tag_id]
    for _ in range(rotation):
        code = rotate90(code, family.layout)

    p = px_per_cell
    side = TAG_CELLS * p
    img = np.empty((side, side, 3), dtype=np.uint8)
    img[:] = palette.white
    lo, hi = (WHITE_HALF - BLACK_HALF) * p, (WHITE_HALF + BLACK_HALF) * p
    img[lo:hi, lo:hi] = palette.black

    grid0 = (WHITE_HALF - GREEN_HALF) * p
    for row in range(4):
        for col in range(4):
            bit = family.layout.cell_bit(code, row, col)
            if family.layout.cell_region(row, col) == GREEN:
                color = palette.green1 if bit else palette.green0
            else:
                color = palette.red1 if bit else palette.red0
            r0 = grid0 + row * p
            c0 = grid0 + col * p
            img[r0:r0 + p, c0:c0 + p] = color

    corners = np.array([
        (lo, lo), (hi, lo), (hi, hi), (lo, hi),
    ], dtype=np.float64)
    return img, corners
