"""Model-input preprocessing: the published pipeline reimplemented.

Annotated images go through channel expansion, a shortest-side bicubic
resize (Catmull-Rom family, a = -0.5, half-pixel centers, edge-clamped
sampling), a center crop to the target side, and per-channel mean/std
normalization into a (3, side, side) float32 tensor.

The default mean/std are the constants shipped with the model checkpoint's
preprocessor configuration; they are configuration, not derived here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, ValidationError
from .image import RasterImage, to_rgb

__all__ = [
    "PreprocessConfig",
    "to_rgb",
    "resize_shortest",
    "center_crop",
    "normalize",
    "denormalize",
    "preprocess",
]

# Normalization constants from the default checkpoint's preprocessor config.
DEFAULT_MEAN = (0.48145466, 0.4578275, 0.40821073)
DEFAULT_STD = (0.26862954, 0.26130258, 0.27577711)


@dataclass(frozen=True)
class PreprocessConfig:
    target_side: int = 224
    mean: tuple[float, float, float] = DEFAULT_MEAN
    std: tuple[float, float, float] = DEFAULT_STD
    resize_kernel: str = "bicubic"

    def __post_init__(self):
        if self.target_side < 1:
            raise ValidationError(f"target_side must be >= 1, got {self.target_side}")
        if self.resize_kernel != "bicubic":
            raise ConfigurationError(f"unsupported resize kernel {self.resize_kernel!r}")
        if any(s <= 0 for s in self.std):
            raise ConfigurationError(f"std components must be > 0, got {self.std}")


def resize_shortest(img: RasterImage, target: int, kernel: str = "bicubic") -> RasterImage:
    """Resize so the shortest side equals target, preserving aspect ratio.

    The long side rounds to the nearest integer. Equal input/output size
    short-circuits to a copy, keeping the 224-crop path bit-exact.
    """
    if kernel != "bicubic":
        raise ConfigurationError(f"unsupported resize kernel {kernel!r}")
    target = int(target)
    if target < 1:
        raise ValidationError(f"resize target must be >= 1, got {target}")
    h, w = img.height, img.width
    short = min(h, w)
    out_h = target if h == short else int(h * target / short + 0.5)
    out_w = target if w == short else int(w * target / short + 0.5)
    if (out_h, out_w) == (h, w):
        return img.copy()
    return RasterImage(_kernels.resize_bicubic(img.pixels, out_h, out_w))


def center_crop(img: RasterImage, side: int) -> RasterImage:
    """Centered side x side window; odd remainders drop the right/bottom pixel."""
    side = int(side)
    if side > img.width or side > img.height:
        raise ValidationError(f"crop side {side} exceeds {img.width}x{img.height} image")
    oy = (img.height - side) // 2
    ox = (img.width - side) // 2
    return RasterImage(img.pixels[oy : oy + side, ox : ox + side].copy())


def normalize(img: RasterImage, cfg: PreprocessConfig) -> np.ndarray:
    """Per-channel (v - mean) / std, transposed to a (3, H, W) float32 tensor."""
    if img.channels != 3:
        raise ValidationError(f"normalize expects 3 channels, got {img.channels}")
    if any(s == 0 for s in cfg.std):
        raise ConfigurationError("std component is zero")
    mean = np.asarray(cfg.mean, dtype=np.float64)
    std = np.asarray(cfg.std, dtype=np.float64)
    out = (img.pixels.astype(np.float64) - mean) / std
    return np.ascontiguousarray(out.transpose(2, 0, 1).astype(np.float32))


def denormalize(tensor: np.ndarray, cfg: PreprocessConfig) -> RasterImage:
    """Inverse of normalize, for overlay rendering and round-trip checks."""
    mean = np.asarray(cfg.mean, dtype=np.float64)
    std = np.asarray(cfg.std, dtype=np.float64)
    arr = tensor.astype(np.float64).transpose(1, 2, 0) * std + mean
    return RasterImage(np.clip(arr, 0.0, 1.0).astype(np.float32))


def preprocess(img: RasterImage, cfg: PreprocessConfig) -> np.ndarray:
    """Full pipeline: expand to RGB, resize shortest side, center crop, normalize."""
    rgb = to_rgb(img)
    resized = resize_shortest(rgb, cfg.target_side, cfg.resize_kernel)
    cropped = center_crop(resized, cfg.target_side)
    return normalize(cropped, cfg)
