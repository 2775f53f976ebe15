# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in numpy_backend.py.

Every expression here mirrors the numpy backend operation-for-operation in
IEEE-754 doubles (the extension is built with -ffp-contract=off), so the two
backends produce bit-identical pixels. Keep both files in sync.
"""

import numpy as np

from libc.math cimport ceil, floor


cdef inline Py_ssize_t _imax(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a > b else b


cdef inline Py_ssize_t _imin(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a < b else b


def paint_ring(float[:, :, ::1] img, double cx, double cy, double radius,
               double half_width, double r, double g, double b):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef double hi = radius + half_width
    cdef double lo = radius - half_width
    if lo < 0.0:
        lo = 0.0
    cdef double lo2 = lo * lo
    cdef double hi2 = hi * hi
    cdef Py_ssize_t x_lo = _imax(<Py_ssize_t>ceil(cx - hi), 0)
    cdef Py_ssize_t x_hi = _imin(<Py_ssize_t>floor(cx + hi), w - 1)
    cdef Py_ssize_t y_lo = _imax(<Py_ssize_t>ceil(cy - hi), 0)
    cdef Py_ssize_t y_hi = _imin(<Py_ssize_t>floor(cy + hi), h - 1)
    cdef float fr = <float>r, fg = <float>g, fb = <float>b
    cdef Py_ssize_t x, y
    cdef double dx, dy, d2
    with nogil:
        for y in range(y_lo, y_hi + 1):
            dy = <double>y - cy
            for x in range(x_lo, x_hi + 1):
                dx = <double>x - cx
                d2 = dy * dy + dx * dx
                if lo2 <= d2 <= hi2:
                    img[y, x, 0] = fr
                    img[y, x, 1] = fg
                    img[y, x, 2] = fb


def paint_segments(float[:, :, ::1] img, double[:, ::1] segs, double half_width,
                   double r, double g, double b):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef double hw2 = half_width * half_width
    cdef float fr = <float>r, fg = <float>g, fb = <float>b
    cdef Py_ssize_t i, x, y, x_lo, x_hi, y_lo, y_hi
    cdef double x0, y0, x1, y1, dx, dy, l2, t, px, py, ex, ey, d2
    cdef double min_x, max_x, min_y, max_y
    with nogil:
        for i in range(segs.shape[0]):
            x0 = segs[i, 0]
            y0 = segs[i, 1]
            x1 = segs[i, 2]
            y1 = segs[i, 3]
            min_x = x0 if x0 < x1 else x1
            max_x = x0 if x0 > x1 else x1
            min_y = y0 if y0 < y1 else y1
            max_y = y0 if y0 > y1 else y1
            x_lo = _imax(<Py_ssize_t>ceil(min_x - half_width), 0)
            x_hi = _imin(<Py_ssize_t>floor(max_x + half_width), w - 1)
            y_lo = _imax(<Py_ssize_t>ceil(min_y - half_width), 0)
            y_hi = _imin(<Py_ssize_t>floor(max_y + half_width), h - 1)
            if x_lo > x_hi or y_lo > y_hi:
                continue
            dx = x1 - x0
            dy = y1 - y0
            l2 = dx * dx + dy * dy
            for y in range(y_lo, y_hi + 1):
                py = <double>y - y0
                for x in range(x_lo, x_hi + 1):
                    px = <double>x - x0
                    if l2 > 0.0:
                        t = (px * dx + py * dy) / l2
                        if t < 0.0:
                            t = 0.0
                        elif t > 1.0:
                            t = 1.0
                    else:
                        t = 0.0
                    ex = px - t * dx
                    ey = py - t * dy
                    d2 = ex * ex + ey * ey
                    if d2 <= hw2:
                        img[y, x, 0] = fr
                        img[y, x, 1] = fg
                        img[y, x, 2] = fb


def paint_triangle(float[:, :, ::1] img, double ax, double ay, double bx, double by,
                   double cx, double cy, double r, double g, double b):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef double area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if area2 == 0.0:
        return
    cdef double min_x = ax, max_x = ax, min_y = ay, max_y = ay
    if bx < min_x: min_x = bx
    if cx < min_x: min_x = cx
    if bx > max_x: max_x = bx
    if cx > max_x: max_x = cx
    if by < min_y: min_y = by
    if cy < min_y: min_y = cy
    if by > max_y: max_y = by
    if cy > max_y: max_y = cy
    cdef Py_ssize_t x_lo = _imax(<Py_ssize_t>ceil(min_x), 0)
    cdef Py_ssize_t x_hi = _imin(<Py_ssize_t>floor(max_x), w - 1)
    cdef Py_ssize_t y_lo = _imax(<Py_ssize_t>ceil(min_y), 0)
    cdef Py_ssize_t y_hi = _imin(<Py_ssize_t>floor(max_y), h - 1)
    cdef float fr = <float>r, fg = <float>g, fb = <float>b
    cdef Py_ssize_t x, y
    cdef double px, py, e0, e1, e2
    cdef bint pos = area2 > 0.0
    cdef bint inside
    with nogil:
        for y in range(y_lo, y_hi + 1):
            py = <double>y
            for x in range(x_lo, x_hi + 1):
                px = <double>x
                e0 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
                e1 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
                e2 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
                if pos:
                    inside = e0 >= 0.0 and e1 >= 0.0 and e2 >= 0.0
                else:
                    inside = e0 <= 0.0 and e1 <= 0.0 and e2 <= 0.0
                if inside:
                    img[y, x, 0] = fr
                    img[y, x, 1] = fg
                    img[y, x, 2] = fb


cdef inline double _catmull_rom(double p0, double p1, double p2, double p3, double t) nogil:
    return p1 + 0.5 * t * (
        p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0))
    )


cdef void _cubic_taps(Py_ssize_t n, Py_ssize_t m, Py_ssize_t[:, ::1] idx, double[::1] t) nogil:
    cdef double scale = <double>n / <double>m
    cdef Py_ssize_t i, k, j
    cdef double s, i0f
    cdef Py_ssize_t base
    for i in range(m):
        s = (<double>i + 0.5) * scale - 0.5
        i0f = floor(s)
        t[i] = s - i0f
        base = <Py_ssize_t>i0f
        for k in range(4):
            j = base - 1 + k
            if j < 0:
                j = 0
            elif j > n - 1:
                j = n - 1
            idx[k, i] = j


def resize_bicubic(float[:, :, ::1] src, Py_ssize_t out_h, Py_ssize_t out_w):
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef Py_ssize_t c = src.shape[2]

    idx_np = np.empty((4, max(out_w, out_h)), dtype=np.intp)
    t_np = np.empty(max(out_w, out_h), dtype=np.float64)
    cdef Py_ssize_t[:, ::1] idx = idx_np
    cdef double[::1] t = t_np

    mid_np = np.empty((h, out_w, c), dtype=np.float64)
    cdef double[:, :, ::1] mid = mid_np
    cdef Py_ssize_t x, y, ch
    cdef double tv

    with nogil:
        _cubic_taps(w, out_w, idx, t)
        for y in range(h):
            for x in range(out_w):
                tv = t[x]
                for ch in range(c):
                    mid[y, x, ch] = _catmull_rom(
                        <double>src[y, idx[0, x], ch], <double>src[y, idx[1, x], ch],
                        <double>src[y, idx[2, x], ch], <double>src[y, idx[3, x], ch], tv)

    out_np = np.empty((out_h, out_w, c), dtype=np.float32)
    cdef float[:, :, ::1] out = out_np
    cdef double v
    with nogil:
        _cubic_taps(h, out_h, idx, t)
        for y in range(out_h):
            tv = t[y]
            for x in range(out_w):
                for ch in range(c):
                    v = _catmull_rom(
                        mid[idx[0, y], x, ch], mid[idx[1, y], x, ch],
                        mid[idx[2, y], x, ch], mid[idx[3, y], x, ch], tv)
                    if v < 0.0:
                        v = 0.0
                    elif v > 1.0:
                        v = 1.0
                    out[y, x, ch] = <float>v
    return out_np


def upsample_bilinear(float[:, ::1] grid, Py_ssize_t out_h, Py_ssize_t out_w):
    cdef Py_ssize_t p = grid.shape[0]
    cdef Py_ssize_t q = grid.shape[1]
    out_np = np.empty((out_h, out_w), dtype=np.float32)
    cdef float[:, ::1] out = out_np
    cdef Py_ssize_t ox, oy, y0, x0, y1, x1
    cdef double sy, sx, ty, tx, u, g00, g01, g10, g11, val
    cdef double scale_y = <double>p / <double>out_h
    cdef double scale_x = <double>q / <double>out_w
    with nogil:
        for oy in range(out_h):
            sy = (<double>oy + 0.5) * scale_y - 0.5
            if sy < 0.0:
                sy = 0.0
            elif sy > <double>(p - 1):
                sy = <double>(p - 1)
            y0 = <Py_ssize_t>floor(sy)
            ty = sy - <double>y0
            y1 = _imin(y0 + 1, p - 1)
            for ox in range(out_w):
                sx = (<double>ox + 0.5) * scale_x - 0.5
                if sx < 0.0:
                    sx = 0.0
                elif sx > <double>(q - 1):
                    sx = <double>(q - 1)
                x0 = <Py_ssize_t>floor(sx)
                tx = sx - <double>x0
                x1 = _imin(x0 + 1, q - 1)
                u = 1.0 - tx
                g00 = <double>grid[y0, x0]
                g01 = <double>grid[y0, x1]
                g10 = <double>grid[y1, x0]
                g11 = <double>grid[y1, x1]
                val = (g00 * u + g01 * tx) * (1.0 - ty) + (g10 * u + g11 * tx) * ty
                out[oy, ox] = <float>val
    return out_np
