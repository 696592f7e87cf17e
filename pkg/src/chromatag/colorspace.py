"""sRGB to CIELAB conversion, scaled to an 8-bit range, with a memoized lookup path.

The scaling convention used throughout the library:

* ``l`` = round(L* * 255 / 100), so 0..255 covers the full luminance range,
* ``a`` = clamp(round(a*) + 128, 0, 255), neutral gray at 128,
* ``b`` = clamp(round(b*) + 128, 0, 255), neutral gray at 128.

All detection thresholds operate on this scale. The conversion assumes the
standard sRGB transfer curve (linear toe) and the D65 white point.

References:
    http://www.brucelindbloom.com/index.html?Eqn_RGB_XYZ_Matrix.html
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

# sRGB primaries -> XYZ under D65.
_M_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ],
    dtype=np.float64,
)

_D65_WHITE = np.array([0.95047, 1.00000, 1.08883], dtype=np.float64)

_EPSILON = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0

_TABLE_SIZE = 1 << 24  # packed 24-bit RGB


@dataclass(frozen=True)
class RgbPixel:
    """An 8-bit RGB pixel. All channels must be in [0, 255]."""

    r: int
    g: int
    b: int

    def __post_init__(self) -> None:
        for v in (self.r, self.g, self.b):
            if not 0 <= v <= 255:
                raise ValueError(f"RGB channel out of range: {(self.r, self.g, self.b)}")


@dataclass(frozen=True)
class LabPixel:
    """A scaled LAB pixel: l in 0..255, a/b in 0..255 with 128 = neutral."""

    l: int
    a: int
    b: int


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    out = np.empty_like(c)
    toe = c <= 0.04045
    out[toe] = c[toe] / 12.92
    out[~toe] = ((c[~toe] + 0.055) / 1.055) ** 2.4
    return out


def rgb_to_lab_array(rgb: np.ndarray) -> np.ndarray:
    """Convert an (..., 3) uint8 sRGB array to scaled LAB uint8.

    This is the single conversion core; the scalar and LUT paths both call it,
    so every path is bit-identical by construction.
    """
    rgb = np.asarray(rgb)
    flat = rgb.reshape(-1, 3).astype(np.float64) / 255.0
    lin = _srgb_to_linear(flat)
    xyz = lin @ _M_RGB_TO_XYZ.T
    t = xyz / _D65_WHITE

    f = np.where(t > _EPSILON, np.cbrt(t), (_KAPPA * t + 16.0) / 116.0)

    lum = 116.0 * f[:, 1] - 16.0
    a = 500.0 * (f[:, 0] - f[:, 1])
    b = 200.0 * (f[:, 1] - f[:, 2])

    out = np.empty(flat.shape, dtype=np.uint8)
    out[:, 0] = np.clip(np.rint(lum * 255.0 / 100.0), 0, 255).astype(np.uint8)
    out[:, 1] = np.clip(np.rint(a) + 128.0, 0, 255).astype(np.uint8)
    out[:, 2] = np.clip(np.rint(b) + 128.0, 0, 255).astype(np.uint8)
    return out.reshape(rgb.shape)


def rgb_to_lab(p: RgbPixel | tuple[int, int, int]) -> LabPixel:
    """Convert one sRGB pixel to scaled LAB. Pure and deterministic."""
    if isinstance(p, RgbPixel):
        rgb = (p.r, p.g, p.b)
    else:
        rgb = p
    l, a, b = rgb_to_lab_array(np.array([rgb], dtype=np.uint8))[0]
    return LabPixel(int(l), int(a), int(b))


def a_diff(p: LabPixel, q: LabPixel) -> int:
    """Signed red-green opponent difference ``p.a - q.a``."""
    return int(p.a) - int(q.a)


class LabTable:
    """Lazily filled direct-indexed conversion table over packed 24-bit RGB.

    Repeated conversions of the same color become a single array gather. The
    worst-case footprint is ~67 MB (three value bytes plus a presence flag per
    color); hosts that cannot afford it should call the direct conversion
    functions instead (see ``DetectorParams.use_lut``).

    Concurrent fills of the same slot write identical bytes, so the table
    needs no locking for correctness; a lock only guards the one-time
    allocation.
    """

    def __init__(self) -> None:
        self._values: np.ndarray | None = None
        self._filled: np.ndarray | None = None
        self._alloc_lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _ensure_alloc(self) -> None:
        if self._values is None:
            with self._alloc_lock:
                if self._values is None:
                    self._filled = np.zeros(_TABLE_SIZE, dtype=bool)
                    self._values = np.zeros((_TABLE_SIZE, 3), dtype=np.uint8)

    def convert(self, rgb: np.ndarray, channel: int | None = None) -> np.ndarray:
        """Convert an (N, 3) uint8 array through the table, filling misses.

        With ``channel`` set, only that LAB channel is gathered and returned
        as an (N,) array; the memoization behavior is identical.
        """
        self._ensure_alloc()
        assert self._values is not None and self._filled is not None
        rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
        keys = rgb[:, 0].astype(np.uint32) << 16
        keys |= rgb[:, 1].astype(np.uint32) << 8
        keys |= rgb[:, 2]
        missing = self._filled[keys]
        np.logical_not(missing, out=missing)
        if missing.any():
            n_missing = int(np.count_nonzero(missing))
            self.misses += n_missing
            self.hits += keys.shape[0] - n_missing
            new_keys = np.unique(keys[missing])
            new_rgb = np.empty((new_keys.shape[0], 3), dtype=np.uint8)
            new_rgb[:, 0] = new_keys >> 16
            new_rgb[:, 1] = (new_keys >> 8) & 0xFF
            new_rgb[:, 2] = new_keys & 0xFF
            self._values[new_keys] = rgb_to_lab_array(new_rgb)
            self._filled[new_keys] = True
        else:
            self.hits += keys.shape[0]
        if channel is None:
            return self._values[keys]
        return self._values[keys, channel]

    def get(self, p: RgbPixel | tuple[int, int, int]) -> LabPixel:
        if isinstance(p, RgbPixel):
            rgb = (p.r, p.g, p.b)
        else:
            rgb = p
        l, a, b = self.convert(np.array([rgb], dtype=np.uint8))[0]
        return LabPixel(int(l), int(a), int(b))


_default_table: LabTable | None = None
_default_table_lock = threading.Lock()


def default_table() -> LabTable:
    """Process-wide shared table, allocated on first use."""
    global _default_table
    if _default_table is None:
        with _default_table_lock:
            if _default_table is None:
                _default_table = LabTable()
    return _default_table


def lab_lut_get(p: RgbPixel | tuple[int, int, int]) -> LabPixel:
    """Memoized equivalent of :func:`rgb_to_lab` using the shared table."""
    return default_table().get(p)
