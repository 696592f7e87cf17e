"""Synthetic ground-truth frames: rendered tags warped onto backgrounds.

A pinhole camera model plus a scene pose produce the homography that places a
tag raster into a background photograph; the ground-truth border quad is the
exact projection of the canonical corners. A photometric chain (per-channel
gains, bias, Gaussian blur, sensor noise, optional Bayer round trip) emulates
capture conditions; the white-balance and no-white-balance presets stand in
for the two lighting conditions of real captures.

All randomness is driven by ``numpy`` seed sequences derived from the sweep
seed and the grid position, so identical inputs reproduce identical frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import taggen
from .codec import TagFamily
from .geometry import polygon_area, project

TAG_HALF = float(taggen.WHITE_HALF)
BORDER_SPAN = 2.0 * taggen.BLACK_HALF  # border quad side, cell units


class SynthError(ValueError):
    """Scene construction failed (tag behind camera or out of frame)."""


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics; principal point defaults to the image center."""

    focal: float = 600.0
    width: int = 752
    height: int = 480
    cx: float | None = None
    cy: float | None = None

    @property
    def principal(self) -> tuple[float, float]:
        cx = self.width / 2.0 if self.cx is None else self.cx
        cy = self.height / 2.0 if self.cy is None else self.cy
        return cx, cy

    def __post_init__(self) -> None:
        if self.focal <= 0:
            raise ValueError("focal length must be positive")
        cx, cy = self.principal
        if not (0 <= cx < self.width and 0 <= cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class ScenePose:
    """Tag placement relative to the camera.

    ``viewing_angle`` is the angle (degrees) between the tag-plane normal and
    the ray from the tag center to the camera center. ``distance`` scales the
    projected size; ``translation`` is the image point the tag center
    projects to (principal point when omitted). ``tilt_azimuth`` orients the
    tilt axis in the image plane.
    """

    viewing_angle: float = 0.0
    in_plane_rotation: float = 0.0
    distance: float = 40.0
    translation: tuple[float, float] | None = None
    tilt_azimuth: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.viewing_angle < 90.0:
            raise ValueError("viewing angle must be in [0, 90)")
        if self.distance <= 0:
            raise ValueError("distance must be positive")


@dataclass(frozen=True)
class PhotometricPreset:
    """Capture emulation: gains, bias, blur, noise, optional Bayer round trip."""

    name: str
    gains: tuple[float, float, float] = (1.0, 1.0, 1.0)
    bias: float = 0.0
    blur_sigma: float = 0.0
    noise_sigma: float = 0.0
    bayer: bool = False

    def __post_init__(self) -> None:
        if any(g <= 0 for g in self.gains):
            raise ValueError("gains must be positive")

    def is_neutral(self) -> bool:
        return (self.gains == (1.0, 1.0, 1.0) and self.bias == 0.0
                and self.blur_sigma == 0.0 and self.noise_sigma == 0.0
                and not self.bayer)


NEUTRAL_PRESET = PhotometricPreset("neutral")
# The NWB gains are a stand-in for an uncorrected illuminant; overridable in
# run configs.
DEFAULT_PRESETS: dict[str, PhotometricPreset] = {
    "wb": PhotometricPreset("wb", (1.0, 1.0, 1.0), 0.0, 0.5, 1.0),
    "nwb": PhotometricPreset("nwb", (1.3, 0.9, 0.7), 0.0, 0.5, 1.0),
}


@dataclass
class SynthFrame:
    image: np.ndarray
    gt_quad: np.ndarray
    gt_id: int
    gt_rotation: int
    tag_size: float           # sqrt of the border-quad image area
    viewing_angle: float
    preset: str
    seed: int


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition for :func:`generate_sweep`."""

    sizes: tuple[float, ...] = tuple(range(20, 161, 10))
    angles: tuple[float, ...] = tuple(range(0, 81, 10))
    presets: tuple[PhotometricPreset, ...] = (DEFAULT_PRESETS["wb"], DEFAULT_PRESETS["nwb"])
    ids_per_cell: int = 1
    px_per_cell: int = 32
    palette: taggen.TagPalette = field(default=taggen.DEFAULT_PALETTE)


def pose_to_homography(pose: ScenePose, cam: CameraModel) -> np.ndarray:
    """Homography from canonical tag coordinates (cell units) to image pixels."""
    cx, cy = cam.principal
    tx, ty = pose.translation if pose.translation is not None else (cx, cy)

    ray = np.array([(tx - cx) / cam.focal, (ty - cy) / cam.focal, 1.0])
    ray /= np.linalg.norm(ray)
    center = ray * pose.distance
    if center[2] <= 0:
        raise SynthError("tag center is behind the camera")

    # Basis perpendicular to the viewing ray; the tilt axis lives in it. At a
    # frontal pose the tag axes coincide with (e1, e2) so +u maps to +x and
    # +v to +y (no mirroring).
    helper = np.array([0.0, 1.0, 0.0]) if abs(ray[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(helper, ray)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(ray, e1)

    va = math.radians(pose.viewing_angle)
    az = math.radians(pose.tilt_azimuth)
    tilt_dir = math.cos(az) * e1 + math.sin(az) * e2
    normal = math.cos(va) * (-ray) + math.sin(va) * tilt_dir

    # Tilt the frontal frame with the rotation that takes -ray to the normal
    # (Rodrigues about the axis perpendicular to both), then spin about the
    # normal by the in-plane angle.
    def rodrigues(axis: np.ndarray, angle: float, vec: np.ndarray) -> np.ndarray:
        return (vec * math.cos(angle) + np.cross(axis, vec) * math.sin(angle)
                + axis * float(np.dot(axis, vec)) * (1.0 - math.cos(angle)))

    if va > 1e-12:
        tilt_axis = np.cross(-ray, tilt_dir)
        u_axis = rodrigues(tilt_axis, va, e1)
        v_axis = rodrigues(tilt_axis, va, e2)
    else:
        u_axis, v_axis = e1, e2
    rot = math.radians(pose.in_plane_rotation)
    if abs(rot) > 1e-12:
        u_rot = rodrigues(normal, rot, u_axis)
        v_rot = rodrigues(normal, rot, v_axis)
    else:
        u_rot, v_rot = u_axis, v_axis

    k = np.array([[cam.focal, 0.0, cx], [0.0, cam.focal, cy], [0.0, 0.0, 1.0]])
    m = np.column_stack([u_rot, v_rot, center])
    h = k @ m
    if abs(h[2, 2]) > 1e-12:
        h = h / h[2, 2]

    corners = np.array([(-TAG_HALF, -TAG_HALF), (TAG_HALF, -TAG_HALF),
                        (TAG_HALF, TAG_HALF), (-TAG_HALF, TAG_HALF)])
    hom = np.hstack([corners, np.ones((4, 1))]) @ h.T
    if np.any(hom[:, 2] <= 0):
        raise SynthError("tag extends behind the camera")
    return h


def _gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float32)
    kernel = np.exp(-0.5 * (xs / sigma) ** 2)
    kernel /= kernel.sum()
    for axis in (0, 1):
        pad = [(0, 0)] * img.ndim
        pad[axis] = (radius, radius)
        padded = np.pad(img, pad, mode="reflect")
        acc = np.zeros_like(img)
        for t, w in enumerate(kernel):
            sl = [slice(None)] * img.ndim
            sl[axis] = slice(t, t + img.shape[axis])
            acc += w * padded[tuple(sl)]
        img = acc
    return img


def _bayer_roundtrip(img: np.ndarray) -> np.ndarray:
    """RGGB mosaic followed by bilinear demosaicing."""
    h, w = img.shape[:2]
    out = np.zeros_like(img)
    masks = np.zeros((h, w, 3), dtype=bool)
    masks[0::2, 0::2, 0] = True   # R
    masks[0::2, 1::2, 1] = True   # G
    masks[1::2, 0::2, 1] = True   # G
    masks[1::2, 1::2, 2] = True   # B

    kern_rb = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float32) / 4.0
    kern_g = np.array([[0, 1, 0], [1, 4, 1], [0, 1, 0]], dtype=np.float32) / 4.0
    for c, kern in ((0, kern_rb), (1, kern_g), (2, kern_rb)):
        sparse = np.where(masks[:, :, c], img[:, :, c], 0.0)
        padded = np.pad(sparse, 1, mode="reflect")
        acc = np.zeros((h, w), dtype=img.dtype)
        for di in range(3):
            for dj in range(3):
                if kern[di, dj]:
                    acc += kern[di, dj] * padded[di:di + h, dj:dj + w]
        out[:, :, c] = acc
    return out


def apply_photometrics(image: np.ndarray, preset: PhotometricPreset,
                       seed: int) -> np.ndarray:
    """Gains, bias, blur, noise (that order), with a seeded noise generator."""
    if preset.is_neutral():
        return image.copy()
    out = image.astype(np.float32)
    out *= np.asarray(preset.gains, dtype=np.float32)
    out += preset.bias
    if preset.blur_sigma > 0:
        out = _gaussian_blur(out, preset.blur_sigma)
    if preset.bayer:
        out = _bayer_roundtrip(out)
    if preset.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        out += rng.normal(0.0, preset.noise_sigma, out.shape).astype(np.float32)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def warp_composite(tag_image: np.ndarray, background: np.ndarray, h: np.ndarray,
                   preset: PhotometricPreset = NEUTRAL_PRESET, seed: int = 0,
                   ) -> SynthFrame:
    """Inverse-warp a tag raster onto a background through homography ``h``.

    ``h`` maps canonical cell coordinates to image pixels. The whole tag
    footprint (including the white margin) must land inside the background;
    otherwise :class:`SynthError` is raised. Ground truth is the exact
    projection of the canonical border corners. The returned frame carries
    id/rotation -1 placeholders; sweep callers fill them.
    """
    bh, bw = background.shape[:2]
    outer = np.array([(-TAG_HALF, -TAG_HALF), (TAG_HALF, -TAG_HALF),
                      (TAG_HALF, TAG_HALF), (-TAG_HALF, TAG_HALF)])
    outer_px = project(h, outer)
    if (outer_px[:, 0].min() < 0 or outer_px[:, 1].min() < 0
            or outer_px[:, 0].max() > bw or outer_px[:, 1].max() > bh):
        raise SynthError("warped tag does not fit inside the background")
    gt_quad = project(h, taggen.canonical_border_corners())

    x0 = int(math.floor(outer_px[:, 0].min()))
    x1 = int(math.ceil(outer_px[:, 0].max()))
    y0 = int(math.floor(outer_px[:, 1].min()))
    y1 = int(math.ceil(outer_px[:, 1].max()))

    xs = np.arange(x0, x1) + 0.5
    ys = np.arange(y0, y1) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    uv = project(np.linalg.inv(h), pts)
    inside = (np.abs(uv[:, 0]) <= TAG_HALF) & (np.abs(uv[:, 1]) <= TAG_HALF)

    th, tw = tag_image.shape[:2]
    p = tw / (2.0 * TAG_HALF)
    tx = (uv[inside, 0] + TAG_HALF) * p - 0.5
    ty = (uv[inside, 1] + TAG_HALF) * p - 0.5
    tx = np.clip(tx, 0.0, tw - 1.0)
    ty = np.clip(ty, 0.0, th - 1.0)
    ix = np.floor(tx).astype(np.intp)
    iy = np.floor(ty).astype(np.intp)
    ix1 = np.minimum(ix + 1, tw - 1)
    iy1 = np.minimum(iy + 1, th - 1)
    fx = (tx - ix)[:, None]
    fy = (ty - iy)[:, None]
    tag_f = tag_image.astype(np.float32)
    sample = ((1 - fx) * (1 - fy) * tag_f[iy, ix]
              + fx * (1 - fy) * tag_f[iy, ix1]
              + (1 - fx) * fy * tag_f[iy1, ix]
              + fx * fy * tag_f[iy1, ix1])

    frame = background.copy()
    region = frame[y0:y1, x0:x1].reshape(-1, 3)
    region[inside] = np.clip(np.rint(sample), 0, 255).astype(np.uint8)
    frame[y0:y1, x0:x1] = region.reshape(y1 - y0, x1 - x0, 3)

    frame = apply_photometrics(frame, preset, seed)
    tag_size = math.sqrt(abs(polygon_area(gt_quad)))
    return SynthFrame(image=frame, gt_quad=gt_quad, gt_id=-1, gt_rotation=-1,
                      tag_size=tag_size, viewing_angle=0.0, preset=preset.name,
                      seed=seed)


def _solve_distance(target_size: float, pose_kwargs: dict, cam: CameraModel) -> ScenePose:
    """Pick the camera distance that hits the target border-quad size."""
    distance = cam.focal * BORDER_SPAN / target_size
    pose = ScenePose(distance=distance, **pose_kwargs)
    for _ in range(6):
        h = pose_to_homography(pose, cam)
        quad = project(h, taggen.canonical_border_corners())
        size = math.sqrt(abs(polygon_area(quad)))
        if abs(size - target_size) / target_size <= 0.005:
            break
        distance *= size / target_size
        pose = ScenePose(distance=distance, **pose_kwargs)
    return pose


def generate_sweep(spec: SweepSpec, family: TagFamily, backgrounds: list[np.ndarray],
                   seed: int = 0, cam: CameraModel | None = None,
                   ) -> tuple[list[SynthFrame], list[dict]]:
    """Generate the full grid of frames and the matching manifest records.

    Deterministic for a given (spec, seed): every cell derives its own seed
    sequence from the grid position. Cells whose tag cannot fit in the frame
    are skipped with a warning record rather than failing the sweep.
    """
    if not backgrounds:
        raise ValueError("at least one background image is required")
    if cam is None:
        bg0 = backgrounds[0]
        cam = CameraModel(width=bg0.shape[1], height=bg0.shape[0])
    frames: list[SynthFrame] = []
    records: list[dict] = []
    renders: dict[tuple[int, int], np.ndarray] = {}

    index = 0
    for i_size, size in enumerate(spec.sizes):
        for i_angle, angle in enumerate(spec.angles):
            for i_preset, preset in enumerate(spec.presets):
                for i_rep in range(spec.ids_per_cell):
                    ss = np.random.SeedSequence(
                        entropy=seed, spawn_key=(i_size, i_angle, i_preset, i_rep))
                    rng = np.random.default_rng(ss)
                    frame = _generate_cell(spec, family, backgrounds, cam, rng,
                                           float(size), float(angle), preset, renders)
                    if frame is None:
                        continue
                    name = f"frame_{index:05d}.png"
                    records.append({
                        "path": name,
                        "id": frame.gt_id,
                        "rotation": frame.gt_rotation,
                        "corners": [[float(x), float(y)] for x, y in frame.gt_quad],
                        "tag_size": round(frame.tag_size, 3),
                        "viewing_angle": frame.viewing_angle,
                        "preset": frame.preset,
                        "seed": frame.seed,
                    })
                    frames.append(frame)
                    index += 1
    return frames, records


def _generate_cell(spec: SweepSpec, family: TagFamily, backgrounds: list,
                   cam: CameraModel, rng: np.random.Generator, size: float,
                   angle: float, preset: PhotometricPreset,
                   renders: dict) -> SynthFrame | None:
    tag_id = int(rng.integers(0, len(family.codes)))
    rotation = int(rng.integers(0, 4))
    bg = backgrounds[int(rng.integers(0, len(backgrounds)))]
    key = (tag_id, rotation)
    if key not in renders:
        renders[key] = taggen.render_tag(family, tag_id, rotation,
                                         spec.px_per_cell, spec.palette)[0]
    tag_img = renders[key]
    noise_seed = int(rng.integers(0, 2**31 - 1))

    # Random placement; shrink the jitter until the tag fits, then give up.
    cx, cy = cam.principal
    full = size * TAG_HALF / taggen.BLACK_HALF  # full footprint side at this size
    for shrink in (1.0, 0.5, 0.25, 0.0):
        margin_x = max((cam.width - full) / 2 - 2, 0) * shrink
        margin_y = max((cam.height - full) / 2 - 2, 0) * shrink
        tx = cx + rng.uniform(-margin_x, margin_x)
        ty = cy + rng.uniform(-margin_y, margin_y)
        pose_kwargs = dict(
            viewing_angle=angle,
            in_plane_rotation=float(rng.uniform(0, 360)),
            tilt_azimuth=float(rng.uniform(0, 360)),
            translation=(tx, ty),
        )
        try:
            pose = _solve_distance(size, pose_kwargs, cam)
            h = pose_to_homography(pose, cam)
            frame = warp_composite(tag_img, bg, h, preset, seed=noise_seed)
        except SynthError:
            continue
        frame.gt_id = tag_id
        frame.gt_rotation = rotation
        frame.viewing_angle = angle
        return frame
    import warnings
    warnings.warn(f"sweep cell skipped: size {size} angle {angle} does not fit",
                  stacklevel=2)
    return None
