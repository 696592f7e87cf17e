#!/usr/bin/env python3
"""Generate the shipped tagless background corpus.

Twelve 752x480 procedural images with natural-image statistics: multi-octave
value noise mapped through muted color ramps, soft large-scale gradients, and
a few blurred rectangular structures. The corpus stands in for photographs in
the false-seed tests, so after generation the script reports the fraction of
grid-scan A-channel differences above the detection trigger threshold; it
must be well under 1 percent.

Run from the repo root:  python scripts/make_backgrounds.py
Writes into src/chromatag/data/backgrounds/.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from chromatag.colorspace import rgb_to_lab_array
from chromatag.imgio import write_image

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "chromatag" / "data" / "backgrounds"
WIDTH, HEIGHT = 752, 480
COUNT = 12
MASTER_SEED = 20240811

# Muted anchor ramps: indoor walls, wood, stone, sky/ground, dry foliage.
RAMPS = [
    [(62, 58, 54), (148, 140, 130), (225, 218, 205)],
    [(40, 48, 60), (110, 125, 140), (200, 210, 220)],
    [(70, 60, 45), (150, 125, 95), (215, 195, 165)],
    [(45, 55, 40), (105, 115, 90), (180, 185, 160)],
    [(55, 50, 60), (130, 120, 135), (210, 200, 210)],
    [(90, 85, 75), (160, 150, 135), (230, 225, 210)],
]


def value_noise(rng: np.random.Generator, h: int, w: int, scale: int) -> np.ndarray:
    gh, gw = h // scale + 2, w // scale + 2
    grid = rng.random((gh, gw))
    ys = np.linspace(0, gh - 1.001, h)
    xs = np.linspace(0, gw - 1.001, w)
    y0 = ys.astype(int)
    x0 = xs.astype(int)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    g00 = grid[y0][:, x0]
    g01 = grid[y0][:, x0 + 1]
    g10 = grid[y0 + 1][:, x0]
    g11 = grid[y0 + 1][:, x0 + 1]
    return g00 * (1 - fy) * (1 - fx) + g01 * (1 - fy) * fx + g10 * fy * (1 - fx) + g11 * fy * fx


def fractal_field(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    field = np.zeros((h, w))
    amp = 1.0
    total = 0.0
    for scale in (192, 96, 48, 24, 12):
        field += amp * value_noise(rng, h, w, scale)
        total += amp
        amp *= 0.55
    field /= total
    lo, hi = field.min(), field.max()
    return (field - lo) / (hi - lo + 1e-9)


def soft_rect(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """A blurred rectangle mask in [0, 1]."""
    mask = np.zeros((h, w))
    rw = int(rng.integers(w // 8, w // 2))
    rh = int(rng.integers(h // 8, h // 2))
    x = int(rng.integers(0, w - rw))
    y = int(rng.integers(0, h - rh))
    mask[y:y + rh, x:x + rw] = 1.0
    sigma = float(rng.uniform(3, 9))
    radius = int(3 * sigma)
    xs = np.arange(-radius, radius + 1)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    k /= k.sum()
    for axis in (0, 1):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        padded = np.pad(mask, pad, mode="edge")
        acc = np.zeros_like(mask)
        for t, wgt in enumerate(k):
            sl = [slice(None)] * 2
            sl[axis] = slice(t, t + mask.shape[axis])
            acc += wgt * padded[tuple(sl)]
        mask = acc
    return mask


def ramp_colorize(field: np.ndarray, ramp: list[tuple[int, int, int]]) -> np.ndarray:
    anchors = np.array(ramp, dtype=np.float64)
    n = len(anchors) - 1
    pos = np.clip(field * n, 0, n - 1e-9)
    idx = pos.astype(int)
    frac = (pos - idx)[..., None]
    return anchors[idx] * (1 - frac) + anchors[idx + 1] * frac


def make_image(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    field = fractal_field(rng, HEIGHT, WIDTH)
    ramp = RAMPS[int(rng.integers(0, len(RAMPS)))]
    img = ramp_colorize(field, ramp)

    # Large-scale illumination gradient.
    gx = np.linspace(-1, 1, WIDTH)[None, :]
    gy = np.linspace(-1, 1, HEIGHT)[:, None]
    ang = rng.uniform(0, 2 * np.pi)
    grad = (np.cos(ang) * gx + np.sin(ang) * gy) * rng.uniform(10, 35)
    img += grad[..., None]

    # A few soft structures in a second muted ramp.
    for _ in range(int(rng.integers(1, 4))):
        other = RAMPS[int(rng.integers(0, len(RAMPS)))]
        tone = np.array(other[int(rng.integers(0, len(other)))], dtype=np.float64)
        mask = soft_rect(rng, HEIGHT, WIDTH)[..., None]
        img = img * (1 - 0.6 * mask) + tone * 0.6 * mask

    img += rng.normal(0, 1.5, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def trigger_fraction(img: np.ndarray, step: int = 4, thresh: int = 25) -> tuple[int, int]:
    grid = img[::step, ::step]
    lab = rgb_to_lab_array(grid.reshape(-1, 3)).reshape(grid.shape)
    a = lab[:, :, 1].astype(np.int16)
    d = a[:, 1:] - a[:, :-1]
    return int((d > thresh).sum()), int(d.size)


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    total_hits = 0
    total_n = 0
    for i in range(COUNT):
        img = make_image(MASTER_SEED + i)
        hits, n = trigger_fraction(img)
        total_hits += hits
        total_n += n
        out = OUT_DIR / f"bg_{i:02d}.png"
        write_image(out, img)
        print(f"{out.name}: trigger fraction {hits}/{n}")
    print(f"corpus total: {total_hits}/{total_n} = {total_hits / total_n:.6f}")


if __name__ == "__main__":
    main()
