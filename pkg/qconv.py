"""Quantum convolution layer.

Slides a 2x2 window over an angle-encoded image, runs the filter circuit on
every window and reads ⟨Z⟩ on the readout wire. All windows of all images in a
batch go through the simulator as one batched circuit evaluation.

Window encodings are channel-major, row-major inside the window:
slot 4*c + p holds pixel p in (top-left, top-right, bottom-left, bottom-right)
of channel c.
"""
import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

import qsim
from colorspace import ColorSpace, ImageTensor
from templates import WINDOW_PIXELS, CircuitTemplate


# ============ CONSTANTS ============

KERNEL = 2
ANGLE_TOLERANCE = 1e-9

logger = logging.getLogger(__name__)


# ============ EXCEPTIONS ============

class QConvError(Exception):
    """Base exception for quantum convolution errors."""
    pass


# ============ TYPES ============

@dataclass(frozen=True)
class FeatureMap:
    """Per-window ⟨Z⟩ readouts, values in [-1, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise QConvError(f"FeatureMap must be 2-D, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


ImageLike = Union[ImageTensor, np.ndarray]


# ============ WINDOWS ============

def output_shape(height: int, width: int, stride: int = 1) -> tuple[int, int]:
    """Feature-map size for a 2x2 kernel without padding."""
    if stride < 1:
        raise QConvError(f"Stride must be >= 1, got {stride}")
    if height < KERNEL or width < KERNEL:
        raise QConvError(f"Image {height}x{width} smaller than the {KERNEL}x{KERNEL} kernel")
    return (height - KERNEL) // stride + 1, (width - KERNEL) // stride + 1


def _as_angles(images: ImageLike) -> np.ndarray:
    if isinstance(images, ImageTensor):
        if images.space is not ColorSpace.ANGLES:
            raise QConvError(f"Quantum convolution needs ANGLES input, got {images.space.value}")
        images = images.values
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim not in (3, 4):
        raise QConvError(f"Expected HxWxC or NxHxWxC angles, got shape {arr.shape}")
    if arr.size and np.max(np.abs(arr)) > math.pi + ANGLE_TOLERANCE:
        raise QConvError(f"Angles outside [-π, π]: max |θ| = {np.max(np.abs(arr)):.6f}")
    return arr


def extract_windows(images: np.ndarray, stride: int = 1) -> np.ndarray:
    """
    Window encodings for every kernel position.

    Args:
        images: Angles of shape (H, W, C) or (N, H, W, C)
        stride: Kernel stride

    Returns:
        Array of shape (..., out_h, out_w, 4*C)
    """
    x = np.asarray(images, dtype=np.float64)
    out_h, out_w = output_shape(x.shape[-3], x.shape[-2], stride)
    r0 = slice(0, (out_h - 1) * stride + 1, stride)
    r1 = slice(1, (out_h - 1) * stride + 2, stride)
    c0 = slice(0, (out_w - 1) * stride + 1, stride)
    c1 = slice(1, (out_w - 1) * stride + 2, stride)
    corners = [
        x[..., r0, c0, :],
        x[..., r0, c1, :],
        x[..., r1, c0, :],
        x[..., r1, c1, :],
    ]
    stacked = np.stack(corners, axis=-1)
    return stacked.reshape(stacked.shape[:-2] + (stacked.shape[-2] * WINDOW_PIXELS,))


def _check(arr: np.ndarray, template: CircuitTemplate, params) -> np.ndarray:
    channels = arr.shape[-1]
    if channels * WINDOW_PIXELS != template.n_encoding:
        raise QConvError(
            f"{template.name} encodes {template.n_encoding // WINDOW_PIXELS} channel(s), "
            f"image has {channels}"
        )
    p = np.asarray(params, dtype=np.float64).reshape(-1)
    if p.shape[0] != template.n_trainable:
        raise QConvError(f"{template.name} needs {template.n_trainable} parameters, got {p.shape[0]}")
    return p


# ============ FORWARD / BACKWARD ============

def qconv_forward_batch(images: ImageLike, template: CircuitTemplate, params, stride: int = 1) -> np.ndarray:
    """Feature maps for a batch of images, shape (N, out_h, out_w)."""
    arr = _as_angles(images)
    if arr.ndim == 3:
        arr = arr[None]
    p = _check(arr, template, params)
    windows = extract_windows(arr, stride)
    n, out_h, out_w, _ = windows.shape
    flat = windows.reshape(-1, template.n_encoding)
    readouts = qsim.readout(template, p, flat)
    return np.clip(np.asarray(readouts).reshape(n, out_h, out_w), -1.0, 1.0)


def qconv_forward(image: ImageLike, template: CircuitTemplate, params, stride: int = 1) -> FeatureMap:
    """Feature map of one H x W x C angle image."""
    arr = _as_angles(image)
    if arr.ndim != 3:
        raise QConvError(f"qconv_forward takes one image, got shape {arr.shape}")
    return FeatureMap(qconv_forward_batch(arr, template, params, stride)[0])


def qconv_backward_batch(
    images: ImageLike,
    template: CircuitTemplate,
    params,
    upstream_grad,
    stride: int = 1,
) -> np.ndarray:
    """Σ over images and windows of upstream ⊙ ∂⟨Z⟩/∂params."""
    arr = _as_angles(images)
    if arr.ndim == 3:
        arr = arr[None]
    p = _check(arr, template, params)
    windows = extract_windows(arr, stride)
    upstream = np.asarray(upstream_grad, dtype=np.float64)
    if upstream.shape != windows.shape[:-1]:
        raise QConvError(f"Upstream gradient shape {upstream.shape} != feature map {windows.shape[:-1]}")
    flat = windows.reshape(-1, template.n_encoding)
    return qsim.adjoint_jacobian(template, p, flat, weights=upstream.reshape(-1))


def qconv_backward(image: ImageLike, template: CircuitTemplate, params, upstream_grad, stride: int = 1) -> np.ndarray:
    """∂Loss/∂params for one image given ∂Loss/∂feature_map."""
    arr = _as_angles(image)
    if arr.ndim != 3:
        raise QConvError(f"qconv_backward takes one image, got shape {arr.shape}")
    upstream = np.asarray(upstream_grad, dtype=np.float64)
    expected = output_shape(arr.shape[0], arr.shape[1], stride)
    if upstream.shape != expected:
        raise QConvError(f"Upstream gradient shape {upstream.shape} != feature map {expected}")
    return qconv_backward_batch(arr, template, params, upstream[None], stride)


# ============ LAYER ============

class QuantumConv:
    """One-kernel quantum convolution layer with an evaluation counter."""

    def __init__(self, template: CircuitTemplate, params, stride: int = 1):
        self.template = template
        self.params = np.asarray(params, dtype=np.float64).reshape(-1).copy()
        if self.params.shape[0] != template.n_trainable:
            raise QConvError(
                f"{template.name} needs {template.n_trainable} parameters, got {self.params.shape[0]}"
            )
        self.stride = stride
        self.evaluations = 0

    @classmethod
    def initialized(cls, template: CircuitTemplate, rng: np.random.Generator, stride: int = 1) -> "QuantumConv":
        """Parameters drawn uniformly from [0, 2π)."""
        return cls(template, rng.uniform(0.0, 2 * math.pi, size=template.n_trainable), stride)

    def output_shape(self, height: int, width: int) -> tuple[int, int]:
        return output_shape(height, width, self.stride)

    def forward(self, images: np.ndarray) -> np.ndarray:
        maps = qconv_forward_batch(images, self.template, self.params, self.stride)
        self.evaluations += maps.size
        logger.debug(f"{self.template.name}: {maps.size} circuit evaluations")
        return maps

    def backward(self, images: np.ndarray, upstream_grad: np.ndarray) -> np.ndarray:
        return qconv_backward_batch(images, self.template, self.params, upstream_grad, self.stride)
