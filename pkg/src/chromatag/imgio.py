"""Image file I/O: 8-bit RGB PNG and binary PPM (P6)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

SUPPORTED_SUFFIXES = (".png", ".ppm")


def read_image(path: str | Path) -> np.ndarray:
    """Load an image file as an (H, W, 3) uint8 RGB array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def write_image(path: str | Path, image: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 array; format chosen by the file extension."""
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise ValueError(f"unsupported image format: {path.suffix!r} (use .png or .ppm)")
    arr = np.ascontiguousarray(image, dtype=np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def list_images(directory: str | Path) -> list[Path]:
    d = Path(directory)
    return sorted(p for p in d.iterdir()
                  if p.suffix.lower() in SUPPORTED_SUFFIXES and p.is_file())


def builtin_backgrounds() -> list[np.ndarray]:
    """The tagless background corpus shipped with the package."""
    root = resources.files("chromatag.data") / "backgrounds"
    images = []
    with resources.as_file(root) as folder:
        for path in list_images(folder):
            images.append(read_image(path))
    if not images:
        raise FileNotFoundError("no shipped background images found")
    return images
