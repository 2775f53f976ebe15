"""Pure-numpy implementations of the per-pixel kernels.

These are the fallback for the compiled extension in ``_core.pyx``. Both
backends evaluate the same IEEE-754 double expressions in the same order, so
their outputs are bit-identical; the parity tests in tests/test_kernels.py
assert exactly that.

Conventions shared by every kernel:
* images are C-contiguous float32 (H, W, 3), painted in place;
* pixel centers sit at integer coordinates (x = column, y = row);
* rasterization is hard (no anti-aliasing): a pixel is either repainted
  to the stroke color or left untouched.
"""

from __future__ import annotations

import math

import numpy as np


def paint_ring(img, cx, cy, radius, half_width, r, g, b):
    """Paint pixels whose center distance d to (cx, cy) satisfies
    |d - radius| <= half_width, clipped at the image borders."""
    h, w = img.shape[:2]
    hi = radius + half_width
    lo = max(radius - half_width, 0.0)
    lo2 = lo * lo
    hi2 = hi * hi
    x_lo = max(int(math.ceil(cx - hi)), 0)
    x_hi = min(int(math.floor(cx + hi)), w - 1)
    y_lo = max(int(math.ceil(cy - hi)), 0)
    y_hi = min(int(math.floor(cy + hi)), h - 1)
    if x_lo > x_hi or y_lo > y_hi:
        return
    xs = np.arange(x_lo, x_hi + 1, dtype=np.float64) - cx
    ys = np.arange(y_lo, y_hi + 1, dtype=np.float64) - cy
    d2 = ys[:, None] * ys[:, None] + xs[None, :] * xs[None, :]
    mask = (d2 >= lo2) & (d2 <= hi2)
    img[y_lo : y_hi + 1, x_lo : x_hi + 1][mask] = np.array([r, g, b], dtype=np.float32)


def paint_segments(img, segs, half_width, r, g, b):
    """Stroke line segments (rows of [x0, y0, x1, y1]) with round caps/joins:
    a pixel is painted when its distance to any segment is <= half_width."""
    h, w = img.shape[:2]
    color = np.array([r, g, b], dtype=np.float32)
    hw2 = half_width * half_width
    for x0, y0, x1, y1 in np.asarray(segs, dtype=np.float64):
        x_lo = max(int(math.ceil(min(x0, x1) - half_width)), 0)
        x_hi = min(int(math.floor(max(x0, x1) + half_width)), w - 1)
        y_lo = max(int(math.ceil(min(y0, y1) - half_width)), 0)
        y_hi = min(int(math.floor(max(y0, y1) + half_width)), h - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        dx = x1 - x0
        dy = y1 - y0
        l2 = dx * dx + dy * dy
        px = np.arange(x_lo, x_hi + 1, dtype=np.float64) - x0
        py = np.arange(y_lo, y_hi + 1, dtype=np.float64) - y0
        if l2 > 0.0:
            t = (px[None, :] * dx + py[:, None] * dy) / l2
            np.clip(t, 0.0, 1.0, out=t)
        else:
            t = np.zeros((py.size, px.size))
        ex = px[None, :] - t * dx
        ey = py[:, None] - t * dy
        d2 = ex * ex + ey * ey
        img[y_lo : y_hi + 1, x_lo : x_hi + 1][d2 <= hw2] = color


def paint_triangle(img, ax, ay, bx, by, cx, cy, r, g, b):
    """Fill the triangle (a, b, c); edge pixels (edge function 0) included."""
    h, w = img.shape[:2]
    area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if area2 == 0.0:
        return
    x_lo = max(int(math.ceil(min(ax, bx, cx))), 0)
    x_hi = min(int(math.floor(max(ax, bx, cx))), w - 1)
    y_lo = max(int(math.ceil(min(ay, by, cy))), 0)
    y_hi = min(int(math.floor(max(ay, by, cy))), h - 1)
    if x_lo > x_hi or y_lo > y_hi:
        return
    px = np.arange(x_lo, x_hi + 1, dtype=np.float64)[None, :]
    py = np.arange(y_lo, y_hi + 1, dtype=np.float64)[:, None]
    e0 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    e1 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
    e2 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
    if area2 > 0.0:
        mask = (e0 >= 0.0) & (e1 >= 0.0) & (e2 >= 0.0)
    else:
        mask = (e0 <= 0.0) & (e1 <= 0.0) & (e2 <= 0.0)
    img[y_lo : y_hi + 1, x_lo : x_hi + 1][mask] = np.array([r, g, b], dtype=np.float32)


def _cubic_taps(n, m):
    """Half-pixel-center source coordinates for resampling n -> m samples.

    Returns clamped tap indices (4, m) and the fractional offsets t (m,).
    """
    scale = float(n) / float(m)
    s = (np.arange(m, dtype=np.float64) + 0.5) * scale - 0.5
    i0 = np.floor(s)
    t = s - i0
    base = i0.astype(np.int64)
    idx = np.stack([base - 1, base, base + 1, base + 2])
    np.clip(idx, 0, n - 1, out=idx)
    return idx, t


def _catmull_rom(p0, p1, p2, p3, t):
    # Difference form of the a = -0.5 cubic convolution kernel: exact on
    # constant input, and the expression C code can reproduce bit-for-bit.
    return p1 + 0.5 * t * (
        p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0))
    )


def resize_bicubic(src, out_h, out_w):
    """Separable Catmull-Rom (a = -0.5) resize with half-pixel centers and
    edge-clamped taps: horizontal pass, vertical pass, clamp to [0, 1]."""
    h, w, c = src.shape
    work = src.astype(np.float64)

    idx, t = _cubic_taps(w, out_w)
    tb = t[None, :, None]
    work = _catmull_rom(
        work[:, idx[0], :], work[:, idx[1], :], work[:, idx[2], :], work[:, idx[3], :], tb
    )

    idx, t = _cubic_taps(h, out_h)
    tb = t[:, None, None]
    work = _catmull_rom(
        work[idx[0], :, :], work[idx[1], :, :], work[idx[2], :, :], work[idx[3], :, :], tb
    )

    np.clip(work, 0.0, 1.0, out=work)
    return work.astype(np.float32)


def upsample_bilinear(grid, out_h, out_w):
    """Bilinear upsample of a 2-D grid with half-pixel-center mapping and
    edge clamping; returns float32 (out_h, out_w)."""
    if getattr(grid, "dtype", None) != np.float32 or grid.ndim != 2:
        # Same contract as the compiled buffer signature.
        raise ValueError("upsample_bilinear expects a 2-D float32 grid")
    p, q = grid.shape
    work = grid.astype(np.float64)

    sy = (np.arange(out_h, dtype=np.float64) + 0.5) * (float(p) / float(out_h)) - 0.5
    sx = (np.arange(out_w, dtype=np.float64) + 0.5) * (float(q) / float(out_w)) - 0.5
    np.clip(sy, 0.0, float(p - 1), out=sy)
    np.clip(sx, 0.0, float(q - 1), out=sx)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    ty = (sy - y0)[:, None]
    tx = (sx - x0)[None, :]
    y1 = np.minimum(y0 + 1, p - 1)
    x1 = np.minimum(x0 + 1, q - 1)

    g00 = work[np.ix_(y0, x0)]
    g01 = work[np.ix_(y0, x1)]
    g10 = work[np.ix_(y1, x0)]
    g11 = work[np.ix_(y1, x1)]
    out = (g00 * (1.0 - tx) + g01 * tx) * (1.0 - ty) + (g10 * (1.0 - tx) + g11 * tx) * ty
    return out.astype(np.float32)
