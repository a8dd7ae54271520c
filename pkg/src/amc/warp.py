"""Motion-compensated activation reconstruction.

Pixel-level motion vectors scale down by the receptive-field stride into
activation-space gather vectors (Q8.8), and the warp engine bilinearly
interpolates the stored key-frame activation at each displaced coordinate.
Out-of-range sources clamp to the activation edge, which avoids injecting
zeros into the suffix where de-occlusion has no correct answer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .fixedpoint import Q_ONE
from .motion import MotionVectorField
from .sparse import SparseActivation, rle_decode


@dataclass(frozen=True)
class ActivationVectorField:
    """Per-activation-coordinate gather vectors in Q8.8 activation units."""

    raw: np.ndarray  # (h, w, 2) int16, raw Q8.8 (dy, dx)

    @property
    def height(self) -> int:
        return self.raw.shape[0]

    @property
    def width(self) -> int:
        return self.raw.shape[1]

    def as_float(self) -> np.ndarray:
        return self.raw.astype(np.float32) / Q_ONE


def zero_vector_field(height: int, width: int) -> ActivationVectorField:
    return ActivationVectorField(raw=np.zeros((height, width, 2), dtype=np.int16))


def scale_vector_field(
    mv: MotionVectorField, rf_stride: int, out_dims: tuple[int, int]
) -> ActivationVectorField:
    """Divide pixel vectors by the receptive-field stride (Q8.8, ties to even)."""
    h, w = out_dims
    if (mv.fields_y, mv.fields_x) != (h, w):
        raise ValueError(
            f"vector field grid {(mv.fields_y, mv.fields_x)} != activation dims {(h, w)}"
        )
    raw = np.rint(mv.vectors.astype(np.float64) * Q_ONE / rf_stride)
    raw = np.clip(raw, np.iinfo(np.int16).min, np.iinfo(np.int16).max)
    return ActivationVectorField(raw=np.ascontiguousarray(raw, dtype=np.int16))


def warp(
    key_activation: SparseActivation,
    field: ActivationVectorField,
    border: str = "clamp",
) -> np.ndarray:
    """Bilinear warp of the stored activation along the gather field.

    For each output coordinate the source is (y, x) + field(y, x); the four
    integer neighbors are weighted by the fractional parts, accumulated in
    widened fixed point, and shifted back to Q8.8 with truncation toward
    zero.  Returns a dense int16 (c, h, w) Q8.8 volume.
    """
    if border != "clamp":
        raise ValueError(f"unsupported border policy {border!r}")
    if (field.height, field.width) != (key_activation.height, key_activation.width):
        raise ValueError(
            f"field dims {(field.height, field.width)} != activation dims "
            f"{(key_activation.height, key_activation.width)}"
        )
    dense = rle_decode(key_activation)
    return _kernels.warp_bilinear(dense, field.raw)
