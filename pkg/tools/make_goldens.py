#!/usr/bin/env python3
"""Regenerate the preprocessing golden files.

This is a standalone reference pipeline, written independently of the
package's resampling code on purpose: it evaluates the full 4x4 bicubic
weight window per output pixel (classic Catmull-Rom weight function,
half-pixel centers, clamped borders) instead of the package's separable
two-pass scheme, so a shared algebra mistake cannot hide in both.

Usage: python3 tools/make_goldens.py  (from the repository root)
"""

import math
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from golden_fixtures import GOLDEN_CONFIG, GOLDEN_INPUTS  # noqa: E402

from vpeval import wire  # noqa: E402  (serialization only; no pipeline code)

A = -0.5  # Catmull-Rom


def _weight(s: float) -> float:
    s = abs(s)
    if s <= 1.0:
        return (A + 2.0) * s**3 - (A + 3.0) * s**2 + 1.0
    if s < 2.0:
        return A * s**3 - 5.0 * A * s**2 + 8.0 * A * s - 4.0 * A
    return 0.0


def _resize_reference(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w, ch = src.shape
    src64 = src.astype(np.float64)
    out = np.empty((out_h, out_w, ch), dtype=np.float64)
    scale_y = in_h / out_h
    scale_x = in_w / out_w
    for oy in range(out_h):
        sy = (oy + 0.5) * scale_y - 0.5
        by = math.floor(sy)
        ty = sy - by
        rows = [min(max(by - 1 + k, 0), in_h - 1) for k in range(4)]
        wy = [_weight(ty + 1.0 - k) for k in range(4)]
        for ox in range(out_w):
            sx = (ox + 0.5) * scale_x - 0.5
            bx = math.floor(sx)
            tx = sx - bx
            cols = [min(max(bx - 1 + k, 0), in_w - 1) for k in range(4)]
            wx = [_weight(tx + 1.0 - k) for k in range(4)]
            for c in range(ch):
                acc = 0.0
                for ky in range(4):
                    row = src64[rows[ky]]
                    part = 0.0
                    for kx in range(4):
                        part += wx[kx] * row[cols[kx], c]
                    acc += wy[ky] * part
                out[oy, ox, c] = acc
    return np.clip(out, 0.0, 1.0)


def _reference_pipeline(pixels: np.ndarray, cfg) -> np.ndarray:
    if pixels.ndim == 2:
        pixels = pixels[:, :, None]
    if pixels.shape[2] == 1:
        pixels = np.repeat(pixels, 3, axis=2)
    h, w = pixels.shape[:2]
    target = cfg.target_side
    short = min(h, w)
    out_h = target if h == short else int(h * target / short + 0.5)
    out_w = target if w == short else int(w * target / short + 0.5)
    if (out_h, out_w) == (h, w):
        resized = pixels.astype(np.float64)
    else:
        resized = _resize_reference(pixels, out_h, out_w)
    oy = (out_h - target) // 2
    ox = (out_w - target) // 2
    cropped = resized[oy : oy + target, ox : ox + target]
    mean = np.asarray(cfg.mean, dtype=np.float64)
    std = np.asarray(cfg.std, dtype=np.float64)
    normalized = (cropped - mean) / std
    return normalized.transpose(2, 0, 1).astype(np.float32)


def main() -> None:
    out_dir = ROOT / "tests" / "goldens"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, make in GOLDEN_INPUTS.items():
        img = make()
        tensor = _reference_pipeline(img.pixels, GOLDEN_CONFIG)
        path = out_dir / f"{name}.vpt"
        path.write_bytes(wire.encode_tensor(tensor))
        print(f"wrote {path} shape={tensor.shape}")


if __name__ == "__main__":
    main()
