"""ChromaTag: a colored fiducial marker with a high-speed detection pipeline.

The tag encodes its ID in the blue-yellow opponent channel of two red and two
green shades, triggers detection on rare red-green jumps in the red-green
channel, and localizes on a black-white border. This package provides tag
rendering, the detector, a synthetic ground-truth generator, and an
evaluation/benchmark harness with a CLI (``chromatag --help``).
"""

from .codec import (
    SignatureTable,
    TagFamily,
    TagLayout,
    build_signature_table,
    builtin_family,
    builtin_signature_table,
    decode_bits,
    filter_family,
    load_code_file,
    rotate90,
)
from .colorspace import LabPixel, LabTable, RgbPixel, a_diff, lab_lut_get, rgb_to_lab
from .detector import ChromaTagDetector, Detection, DetectorParams, FrameResult, detect
from .synth import (
    CameraModel,
    PhotometricPreset,
    ScenePose,
    SweepSpec,
    SynthFrame,
    generate_sweep,
    pose_to_homography,
    warp_composite,
)
from .taggen import DEFAULT_PALETTE, TagPalette, render_tag, validate_palette

__version__ = "0.1.0"

__all__ = [
    "ChromaTagDetector",
    "CameraModel",
    "DEFAULT_PALETTE",
    "Detection",
    "DetectorParams",
    "FrameResult",
    "LabPixel",
    "LabTable",
    "PhotometricPreset",
    "RgbPixel",
    "ScenePose",
    "SignatureTable",
    "SweepSpec",
    "SynthFrame",
    "TagFamily",
    "TagLayout",
    "TagPalette",
    "a_diff",
    "build_signature_table",
    "builtin_family",
    "builtin_signature_table",
    "decode_bits",
    "detect",
    "filter_family",
    "generate_sweep",
    "lab_lut_get",
    "load_code_file",
    "pose_to_homography",
    "render_tag",
    "rgb_to_lab",
    "rotate90",
    "validate_palette",
    "warp_composite",
]
