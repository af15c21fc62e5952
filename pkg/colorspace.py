"""Color-space conversion, angle scaling and bilinear resizing.

Preprocessing pipeline (fixed order):
    RGB01 -> convert (RGB | LAB | YCbCr) -> scale each channel to [0, 1] by its
    nominal range -> bilinear resize -> map [0, 1] to [-π, π].

Interpolation therefore always happens in a bounded [0, 1] space. The resize
has no anti-aliasing prefilter (plain bilinear, half-pixel centers), which
differs from some image libraries' downsampling defaults.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np


# ============ CONSTANTS ============

RANGE_SLACK = 1e-6

# sRGB (D65) -> CIE XYZ
SRGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
# D65 reference white as the image of RGB (1, 1, 1), so white maps to L = 100 exactly
D65_WHITE = SRGB_TO_XYZ.sum(axis=1)
LAB_DELTA = 6.0 / 29.0

# BT.601 studio swing, RGB in [0, 1]
YCBCR_OFFSET = np.array([16.0, 128.0, 128.0])
RGB_TO_YCBCR = np.array([
    [65.481, 128.553, 24.966],
    [-37.797, -74.203, 112.0],
    [112.0, -93.786, -18.214],
])

logger = logging.getLogger(__name__)


# ============ EXCEPTIONS ============

class ColorSpaceError(Exception):
    """Base exception for color conversion and scaling errors."""
    pass


# ============ TYPES ============

class ColorSpace(str, Enum):
    RGB01 = "RGB01"
    LAB = "LAB"
    YCBCR = "YCBCR"
    UNIT = "UNIT"
    ANGLES = "ANGLES"


NOMINAL_RANGES: dict[ColorSpace, tuple[tuple[float, float], ...]] = {
    ColorSpace.RGB01: ((0.0, 1.0),) * 3,
    ColorSpace.LAB: ((0.0, 100.0), (-128.0, 127.0), (-128.0, 127.0)),
    ColorSpace.YCBCR: ((16.0, 235.0), (16.0, 240.0), (16.0, 240.0)),
    ColorSpace.UNIT: ((0.0, 1.0),) * 3,
    ColorSpace.ANGLES: ((-math.pi, math.pi),) * 3,
}

CHANNEL_NAMES: dict[ColorSpace, tuple[str, str, str]] = {
    ColorSpace.RGB01: ("R", "G", "B"),
    ColorSpace.LAB: ("L", "A", "B"),
    ColorSpace.YCBCR: ("Y", "Cb", "Cr"),
}

_ALIASES = {
    "RGB": ColorSpace.RGB01,
    "RGB01": ColorSpace.RGB01,
    "LAB": ColorSpace.LAB,
    "YCBCR": ColorSpace.YCBCR,
    "UNIT": ColorSpace.UNIT,
    "ANGLES": ColorSpace.ANGLES,
}


@dataclass(frozen=True)
class ImageTensor:
    """Real image of shape (H, W, C), or a stack (N, H, W, C), in a declared space."""

    values: np.ndarray
    space: ColorSpace

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim not in (3, 4):
            raise ColorSpaceError(f"Expected HxWxC or NxHxWxC image, got shape {values.shape}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "space", parse_color_space(self.space))

    @property
    def height(self) -> int:
        return self.values.shape[-3]

    @property
    def width(self) -> int:
        return self.values.shape[-2]

    @property
    def channels(self) -> int:
        return self.values.shape[-1]

    @property
    def ranges(self) -> tuple[tuple[float, float], ...]:
        return NOMINAL_RANGES[self.space][: self.channels]

    def channel(self, index: int) -> "ImageTensor":
        """Single-channel view keeping the channel axis."""
        return ImageTensor(self.values[..., index:index + 1], self.space)


def parse_color_space(name: Union[str, ColorSpace]) -> ColorSpace:
    if isinstance(name, ColorSpace):
        return name
    key = str(name).strip().upper()
    if key not in _ALIASES:
        raise ColorSpaceError(f"Unknown color space {name!r}")
    return _ALIASES[key]


def channel_names(space: Union[str, ColorSpace]) -> tuple[str, str, str]:
    space = parse_color_space(space)
    if space not in CHANNEL_NAMES:
        raise ColorSpaceError(f"{space.value} has no named channels")
    return CHANNEL_NAMES[space]


# ============ CONVERSIONS ============

def _require_rgb01(img: ImageTensor) -> np.ndarray:
    if img.space is not ColorSpace.RGB01:
        raise ColorSpaceError(f"Expected RGB01 input, got {img.space.value}")
    if img.channels != 3:
        raise ColorSpaceError(f"Expected 3 channels, got {img.channels}")
    v = img.values
    if v.size and (v.min() < -RANGE_SLACK or v.max() > 1.0 + RANGE_SLACK):
        raise ColorSpaceError(f"RGB01 values outside [0, 1]: [{v.min():.6g}, {v.max():.6g}]")
    return np.clip(v, 0.0, 1.0)


def srgb_to_linear(c: np.ndarray) -> np.ndarray:
    """Inverse sRGB companding."""
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > LAB_DELTA ** 3, np.cbrt(t), t / (3 * LAB_DELTA ** 2) + 4.0 / 29.0)


def rgb_to_xyz(img: ImageTensor) -> np.ndarray:
    """Linearized sRGB to CIE XYZ (D65), as a raw array."""
    rgb = _require_rgb01(img)
    return srgb_to_linear(rgb) @ SRGB_TO_XYZ.T


def rgb_to_lab(img: ImageTensor) -> ImageTensor:
    """
    RGB01 -> CIE LAB via XYZ with the D65 reference white.

    Args:
        img: Image in RGB01

    Returns:
        Image in LAB (L in [0, 100], A/B roughly [-128, 127])

    Raises:
        ColorSpaceError: On wrong space or out-of-range input
    """
    fx, fy, fz = np.moveaxis(_lab_f(rgb_to_xyz(img) / D65_WHITE), -1, 0)
    lab = np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)
    return ImageTensor(lab, ColorSpace.LAB)


def rgb_to_ycbcr(img: ImageTensor) -> ImageTensor:
    """RGB01 -> BT.601 studio-swing YCbCr (Y in [16, 235], Cb/Cr in [16, 240])."""
    rgb = _require_rgb01(img)
    return ImageTensor(rgb @ RGB_TO_YCBCR.T + YCBCR_OFFSET, ColorSpace.YCBCR)


def convert(img: ImageTensor, target: Union[str, ColorSpace]) -> ImageTensor:
    """Convert an RGB01 image to RGB01, LAB or YCbCr."""
    target = parse_color_space(target)
    if target is ColorSpace.RGB01:
        return ImageTensor(_require_rgb01(img), ColorSpace.RGB01)
    if target is ColorSpace.LAB:
        return rgb_to_lab(img)
    if target is ColorSpace.YCBCR:
        return rgb_to_ycbcr(img)
    raise ColorSpaceError(f"Cannot convert to {target.value}")


# ============ SCALING ============

def _bounds(img: ImageTensor, space: ColorSpace) -> tuple[np.ndarray, np.ndarray]:
    ranges = NOMINAL_RANGES[space]
    if img.channels > len(ranges):
        raise ColorSpaceError(f"{space.value} defines {len(ranges)} channels, image has {img.channels}")
    lo = np.array([r[0] for r in ranges[: img.channels]])
    hi = np.array([r[1] for r in ranges[: img.channels]])
    return lo, hi


def scale_to_unit(img: ImageTensor, space: Optional[Union[str, ColorSpace]] = None) -> ImageTensor:
    """
    Affine map of each channel's nominal range onto [0, 1].

    Values up to RANGE_SLACK outside the nominal range are clamped; anything
    further out raises.
    """
    space = parse_color_space(space) if space is not None else img.space
    lo, hi = _bounds(img, space)
    v = img.values
    if v.size:
        below = v < lo - RANGE_SLACK
        above = v > hi + RANGE_SLACK
        if below.any() or above.any():
            raise ColorSpaceError(
                f"{space.value} values outside nominal range: [{v.min():.6g}, {v.max():.6g}]"
            )
        if (v < lo).any() or (v > hi).any():
            logger.warning(f"Clamped {space.value} values within slack")
    unit = (np.clip(v, lo, hi) - lo) / (hi - lo)
    return ImageTensor(unit, ColorSpace.UNIT)


def normalize_to_angles(img: ImageTensor, space: Optional[Union[str, ColorSpace]] = None) -> ImageTensor:
    """Per-channel map of the nominal range onto [-π, π]: θ = 2π·x01 − π."""
    unit = scale_to_unit(img, space)
    return ImageTensor(2.0 * math.pi * unit.values - math.pi, ColorSpace.ANGLES)


def angles_to_space(img: ImageTensor, space: Union[str, ColorSpace]) -> ImageTensor:
    """Inverse of normalize_to_angles."""
    if img.space is not ColorSpace.ANGLES:
        raise ColorSpaceError(f"Expected ANGLES input, got {img.space.value}")
    space = parse_color_space(space)
    lo, hi = _bounds(img, space)
    unit = (img.values + math.pi) / (2.0 * math.pi)
    return ImageTensor(lo + unit * (hi - lo), space)


# ============ RESIZING ============

def _source_axis(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    src = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def bilinear_resize(img: ImageTensor, out_h: int, out_w: int) -> ImageTensor:
    """
    Bilinear resize with half-pixel centers, borders clamped, channels independent.

    src = (dst + 0.5) * in / out - 0.5
    """
    if out_h <= 0 or out_w <= 0:
        raise ColorSpaceError(f"Target size must be positive, got {out_h}x{out_w}")
    v = img.values
    r0, r1, wr = _source_axis(v.shape[-3], out_h)
    c0, c1, wc = _source_axis(v.shape[-2], out_w)

    wr = wr[:, None, None]
    rows = v[..., r0, :, :] * (1.0 - wr) + v[..., r1, :, :] * wr
    wc = wc[:, None]
    out = rows[..., :, c0, :] * (1.0 - wc) + rows[..., :, c1, :] * wc
    return ImageTensor(out, img.space)


# ============ PIPELINE ============

def preprocess(img: ImageTensor, space: Union[str, ColorSpace], size: int) -> ImageTensor:
    """RGB01 -> target space -> [0, 1] -> size x size -> [-π, π]."""
    converted = convert(img, space)
    unit = scale_to_unit(converted)
    resized = bilinear_resize(unit, size, size)
    return normalize_to_angles(resized)
