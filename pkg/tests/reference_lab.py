"""Independent high-precision sRGB -> CIELAB reference for oracle tests.

Deliberately separate from the package: textbook formulas written out in
plain Python floats, no shared helpers, so it can serve as an oracle for the
library's conversion path.
"""

M = (
    (0.4124564, 0.3575761, 0.1804375),
    (0.2126729, 0.7151522, 0.0721750),
    (0.0193339, 0.1191920, 0.9503041),
)
WHITE = (0.95047, 1.00000, 1.08883)


def _linear(channel_8bit: int) -> float:
    c = channel_8bit / 255.0
    if c <= 0.04045:
        return c / 12.92
    return ((c + 0.055) / 1.055) ** 2.4


def _f(t: float) -> float:
    if t > 216.0 / 24389.0:
        return t ** (1.0 / 3.0)
    return (24389.0 / 27.0 * t + 16.0) / 116.0


def cielab(r: int, g: int, b: int) -> tuple[float, float, float]:
    """Unscaled L*, a*, b* for one 8-bit sRGB pixel."""
    rl, gl, bl = _linear(r), _linear(g), _linear(b)
    xyz = tuple(m[0] * rl + m[1] * gl + m[2] * bl for m in M)
    fx, fy, fz = (_f(v / w) for v, w in zip(xyz, WHITE))
    return 116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)


def scaled(r: int, g: int, b: int) -> tuple[int, int, int]:
    """The library's 8-bit scaling applied to the reference values."""
    lum, a, b_ = cielab(r, g, b)
    to_byte = lambda v: int(max(0, min(255, v)))  # noqa: E731
    half_even = lambda v: int(round(v))  # noqa: E731  (banker's rounding, as numpy rint)
    return (
        to_byte(half_even(lum * 255.0 / 100.0)),
        to_byte(half_even(a) + 128),
        to_byte(half_even(b_) + 128),
    )
