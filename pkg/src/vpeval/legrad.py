"""Attention-gradient explanation maps.

Collapses a (layers, heads, tokens, tokens) attention-gradient tensor into a
single patch-grid saliency map: rectify, average over heads and query
positions per layer, drop the class-token column, average over layers, and
min-max normalize into [0, 1]. Accumulation is float64 regardless of input
dtype so layer order cannot perturb the result at float32 precision.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError
from .image import RasterImage, to_rgb
from ._kernels import upsample_bilinear


def attention_map(grads: np.ndarray) -> np.ndarray:
    """(layers, heads, tokens, tokens) gradients -> (P, P) map in [0, 1].

    tokens must be P*P + 1 (class token first). An all-zero input maps to
    all zeros; any other constant map normalizes to all ones.
    """
    arr = np.asarray(grads, dtype=np.float64)
    if arr.ndim != 4:
        raise ValidationError(f"expected 4-D gradients, got shape {arr.shape}")
    layers, heads, t_q, t_k = arr.shape
    if layers < 1 or heads < 1:
        raise ValidationError(f"expected at least one layer and head, got shape {arr.shape}")
    if t_q != t_k:
        raise ValidationError(f"attention must be square in tokens, got {t_q}x{t_k}")
    if not np.isfinite(arr).all():
        raise ValidationError("gradients must be finite")
    side = math.isqrt(t_k - 1)
    if t_k < 2 or side * side != t_k - 1:
        raise ValidationError(f"{t_k} tokens is not a patch grid plus class token")

    rectified = np.maximum(arr, 0.0)
    # Per layer: mean over heads and query positions -> (layers, tokens).
    per_layer = rectified.mean(axis=(1, 2))
    patch = per_layer[:, 1:].mean(axis=0)
    grid = patch.reshape(side, side)

    lo = grid.min()
    hi = grid.max()
    if hi == lo:
        return np.zeros_like(grid) if hi == 0.0 else np.ones_like(grid)
    return (grid - lo) / (hi - lo)


def _colormap(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] scalars to RGB through a blue->cyan->yellow->red ramp."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    r = np.clip(3.0 * v - 1.0, 0.0, 1.0)
    g = np.clip(1.5 - abs(3.0 * v - 1.5), 0.0, 1.0)
    b = np.clip(1.0 - 3.0 * v, 0.0, 1.0)
    return np.stack([r, g, b], axis=-1)


def overlay_heatmap(image: RasterImage, heatmap: np.ndarray, alpha: float = 0.5) -> RasterImage:
    """Blend a patch-grid heatmap over an image for visual inspection.

    The heatmap is bilinearly upsampled to the image size; output is RGB.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must be in [0, 1], got {alpha}")
    hm = np.asarray(heatmap, dtype=np.float32)
    if hm.ndim != 2:
        raise ValidationError(f"heatmap must be 2-D, got shape {hm.shape}")
    base = to_rgb(image)
    up = upsample_bilinear(np.ascontiguousarray(hm), base.height, base.width)
    colored = _colormap(np.asarray(up, dtype=np.float64))
    blended = (1.0 - alpha) * base.pixels.astype(np.float64) + alpha * colored
    return RasterImage(np.clip(blended, 0.0, 1.0).astype(np.float32))
