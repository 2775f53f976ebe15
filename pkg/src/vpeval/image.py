"""In-memory image type and PNG output.

All pixel data in this package is float32 in [0, 1], stored row-major as
(height, width, channels) with channels 1 (grayscale) or 3 (RGB). Images at
native radiograph resolution and small crops share the same type.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ValidationError


@dataclass(frozen=True)
class RasterImage:
    """Pixel buffer with intensities in [0, 1].

    ``pixels`` is coerced to a C-contiguous float32 array of shape
    (height, width, channels). The [0, 1] range is guaranteed by every
    producer in this package; ``validate_range`` re-checks it on demand.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValidationError(f"expected 2-D or 3-D pixel array, got ndim={arr.ndim}")
        if arr.shape[2] not in (1, 3):
            raise ValidationError(f"expected 1 or 3 channels, got {arr.shape[2]}")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def copy(self) -> "RasterImage":
        return RasterImage(self.pixels.copy())

    def validate_range(self) -> None:
        lo = float(self.pixels.min(initial=0.0))
        hi = float(self.pixels.max(initial=0.0))
        if lo < 0.0 or hi > 1.0:
            raise ValidationError(f"intensities outside [0, 1]: min={lo}, max={hi}")


def to_rgb(img: RasterImage) -> RasterImage:
    """Replicate a grayscale image into 3 identical channels.

    3-channel input is returned unchanged (same object).
    """
    if img.channels == 3:
        return img
    if img.channels != 1:
        raise ValidationError(f"cannot expand {img.channels}-channel image")
    return RasterImage(np.repeat(img.pixels, 3, axis=2))


def write_png(img: RasterImage, path: str | Path) -> None:
    """Write as 8-bit grayscale or RGB PNG, quantizing with round(v * 255)."""
    arr = np.rint(img.pixels.astype(np.float64) * 255.0).astype(np.uint8)
    if img.channels == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(arr, mode="RGB")
    pil.save(Path(path), format="PNG")
