"""Visual prompt rasterization at native image resolution.

Markers (circle, rightward arrow, mask contour) are drawn before any
preprocessing, with hard non-anti-aliased strokes so outputs are
deterministic and checkable pixel-by-pixel. The crop prompt and the MedSAM
box prompt construction live here too.

Geometry conventions: pixel centers at integer coordinates, x = column,
y = row (growing downward). The circle radius is
scale_factor * nodule_diameter / 2, i.e. a marker diameter of
scale_factor times the nodule size. The arrow points right at the nodule
with its tip offset one nodule diameter to the left of the center.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .dataset import NoduleRecord
from .errors import ConfigurationError, ValidationError
from .image import RasterImage, to_rgb


class MarkerKind(str, enum.Enum):
    NONE = "none"
    CROP = "crop"
    CIRCLE = "circle"
    ARROW = "arrow"
    CONTOUR = "contour"


@dataclass(frozen=True)
class MarkerSpec:
    """Which prompt to draw and how.

    stroke_width_px and the arrow proportions are stated at native
    resolution; the defaults stay visible after the ~9x downscale of a
    2048px radiograph to 224px.
    """

    kind: MarkerKind = MarkerKind.NONE
    color: tuple[float, float, float] = (1.0, 0.0, 0.0)
    stroke_width_px: int = 8
    scale_factor: float = 5.0
    # Arrow proportions as multiples of the nodule diameter d: the tip sits
    # d left of the center, the shaft reaches 4d further left, the head is
    # an isoceles triangle d long with half-width 0.5d.
    arrow_shaft_mult: float = 4.0
    arrow_head_mult: float = 1.0
    arrow_half_width_mult: float = 0.5
    crop_side: int = 224

    def __post_init__(self):
        if self.stroke_width_px < 1:
            raise ValidationError(f"stroke_width_px must be >= 1, got {self.stroke_width_px}")
        if not self.scale_factor > 0:
            raise ValidationError(f"scale_factor must be > 0, got {self.scale_factor}")
        if len(self.color) != 3 or any(not 0.0 <= c <= 1.0 for c in self.color):
            raise ValidationError(f"color must be an RGB triple in [0, 1], got {self.color}")
        if min(self.arrow_shaft_mult, self.arrow_head_mult, self.arrow_half_width_mult) <= 0:
            raise ValidationError("arrow proportions must be positive")


@dataclass(frozen=True)
class Polygon:
    """Ordered vertex chain in pixel coordinates; closed ones form loops."""

    vertices: tuple[tuple[float, float], ...]
    closed: bool = True

    def __post_init__(self):
        if self.closed and len(self.vertices) < 3:
            raise ValidationError(f"closed polygon needs >= 3 vertices, got {len(self.vertices)}")

    def shoelace_area(self) -> float:
        """Signed area; the sign encodes orientation, holes come out opposite."""
        verts = self.vertices
        acc = 0.0
        for k in range(len(verts)):
            x0, y0 = verts[k]
            x1, y1 = verts[(k + 1) % len(verts)]
            acc += x0 * y1 - x1 * y0
        return 0.5 * acc


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(f"degenerate bounding box {self}")

    def clipped(self, width: int, height: int) -> "BoundingBox":
        return BoundingBox(
            max(self.x_min, 0.0),
            max(self.y_min, 0.0),
            min(self.x_max, float(width - 1)),
            min(self.y_max, float(height - 1)),
        )

    def as_csv(self) -> str:
        return f"{self.x_min!r},{self.y_min!r},{self.x_max!r},{self.y_max!r}"


def _check_center(img: RasterImage, center) -> tuple[float, float]:
    cx, cy = float(center[0]), float(center[1])
    if not (0 <= cx < img.width and 0 <= cy < img.height):
        raise ValidationError(f"center ({cx}, {cy}) outside {img.width}x{img.height} image")
    return cx, cy


def _check_diameter(d: float) -> float:
    d = float(d)
    if not (math.isfinite(d) and d > 0):
        raise ValidationError(f"nodule diameter must be positive, got {d}")
    return d


def draw_circle(img: RasterImage, center, nodule_diameter_px: float, spec: MarkerSpec) -> RasterImage:
    """Stroke a ring of radius spec.scale_factor * diameter / 2 around center."""
    d = _check_diameter(nodule_diameter_px)
    cx, cy = _check_center(img, center)
    out = to_rgb(img).pixels.copy()
    radius = spec.scale_factor * d / 2.0
    _kernels.paint_ring(out, cx, cy, radius, spec.stroke_width_px / 2.0, *spec.color)
    return RasterImage(out)


def draw_arrow(img: RasterImage, center, nodule_diameter_px: float, spec: MarkerSpec) -> RasterImage:
    """Draw a rightward arrow whose tip sits one nodule diameter left of center."""
    d = _check_diameter(nodule_diameter_px)
    cx, cy = _check_center(img, center)
    out = to_rgb(img).pixels.copy()

    tip_x = cx - d
    base_x = tip_x - spec.arrow_head_mult * d
    tail_x = tip_x - spec.arrow_shaft_mult * d
    half_w = spec.arrow_half_width_mult * d
    # Shaft stops at the head base so no stroke cap pokes past the tip.
    shaft = np.array([[tail_x, cy, base_x, cy]], dtype=np.float64)
    _kernels.paint_segments(out, shaft, spec.stroke_width_px / 2.0, *spec.color)
    _kernels.paint_triangle(out, tip_x, cy, base_x, cy - half_w, base_x, cy + half_w, *spec.color)
    return RasterImage(out)


def draw_polyline(img: RasterImage, polys: Sequence[Polygon], spec: MarkerSpec) -> RasterImage:
    """Stroke polygons with round joins; out-of-image vertices clip silently."""
    out = to_rgb(img).pixels.copy()
    segs = []
    for poly in polys:
        verts = poly.vertices
        n = len(verts)
        if n < 2:
            continue
        last = n if poly.closed else n - 1
        for k in range(last):
            x0, y0 = verts[k]
            x1, y1 = verts[(k + 1) % n]
            segs.append((x0, y0, x1, y1))
    if segs:
        arr = np.array(segs, dtype=np.float64)
        _kernels.paint_segments(out, arr, spec.stroke_width_px / 2.0, *spec.color)
    return RasterImage(out)


# Marching-squares segment table. Cell code = tl*8 + tr*4 + br*2 + bl over
# the four sample corners; entries are (start_edge, end_edge) chords with
# edges T/B/L/R, directed so the loop runs counterclockwise on screen around
# foreground. Saddles (5, 10) keep diagonal foreground disconnected.
_T, _B, _L, _R = 0, 1, 2, 3
_MS_SEGMENTS: dict[int, tuple[tuple[int, int], ...]] = {
    0: (),
    1: ((_B, _L),),
    2: ((_R, _B),),
    3: ((_R, _L),),
    4: ((_T, _R),),
    5: ((_T, _R), (_B, _L)),
    6: ((_T, _B),),
    7: ((_T, _L),),
    8: ((_L, _T),),
    9: ((_B, _T),),
    10: ((_L, _T), (_R, _B)),
    11: ((_R, _T),),
    12: ((_L, _R),),
    13: ((_B, _R),),
    14: ((_L, _B),),
    15: (),
}


def _edge_vertex(edge: int, i: int, j: int) -> tuple[float, float]:
    # Cell (i, j) of the zero-padded sample grid; sample (i, j) is the pixel
    # center (x, y) = (j - 1, i - 1).
    if edge == _T:
        return (j - 0.5, float(i - 1))
    if edge == _B:
        return (j - 0.5, float(i))
    if edge == _L:
        return (float(j - 1), i - 0.5)
    return (float(j), i - 0.5)


def extract_contour(mask: RasterImage) -> list[Polygon]:
    """Marching-squares boundary of a binary mask at the 0.5 isoline.

    Pixel centers are the sample points; vertices sit at the midpoints of
    sample-grid edges (no interpolation). Returns one closed polygon per
    boundary loop, each rotated to start at its lexicographically smallest
    (y, x) vertex, loops sorted by that start vertex.
    """
    if mask.channels != 1:
        raise ValidationError(f"mask must be single-channel, got {mask.channels}")
    vals = np.unique(mask.pixels)
    if not np.isin(vals, (0.0, 1.0)).all():
        raise ValidationError("mask values must be exactly 0 or 1")

    h, w = mask.height, mask.width
    padded = np.zeros((h + 2, w + 2), dtype=np.uint8)
    padded[1:-1, 1:-1] = mask.pixels[:, :, 0] > 0.5
    code = (
        (padded[:-1, :-1] << 3) | (padded[:-1, 1:] << 2) | (padded[1:, 1:] << 1) | padded[1:, :-1]
    )

    succ: dict[tuple[float, float], tuple[float, float]] = {}
    for i, j in np.argwhere((code != 0) & (code != 15)):
        for start_edge, end_edge in _MS_SEGMENTS[int(code[i, j])]:
            succ[_edge_vertex(start_edge, i, j)] = _edge_vertex(end_edge, i, j)

    polys = []
    remaining = set(succ)
    while remaining:
        start = min(remaining, key=lambda v: (v[1], v[0]))
        loop = [start]
        remaining.discard(start)
        cur = succ[start]
        while cur != start:
            loop.append(cur)
            remaining.discard(cur)
            cur = succ[cur]
        polys.append(Polygon(tuple(loop), closed=True))
    return polys


def crop_square(img: RasterImage, center, side: int = 224) -> RasterImage:
    """Extract a side x side window centered at center, clamped into bounds."""
    side = int(side)
    if side < 1 or side > min(img.width, img.height):
        raise ValidationError(
            f"crop side {side} does not fit {img.width}x{img.height} image"
        )
    ox = min(max(int(center[0]) - side // 2, 0), img.width - side)
    oy = min(max(int(center[1]) - side // 2, 0), img.height - side)
    return RasterImage(img.pixels[oy : oy + side, ox : ox + side].copy())


def nodule_bbox(center, nodule_diameter_px: float, scale_factor: float) -> BoundingBox:
    """Axis-aligned square of side scale_factor * diameter centered on the nodule."""
    d = _check_diameter(nodule_diameter_px)
    half = scale_factor * d / 2.0
    cx, cy = float(center[0]), float(center[1])
    return BoundingBox(cx - half, cy - half, cx + half, cy + half)


def apply_marker(
    img: RasterImage,
    rec: NoduleRecord,
    spec: MarkerSpec,
    mask: Optional[RasterImage] = None,
) -> RasterImage:
    """Dispatch to the drawing operation for spec.kind at native resolution."""
    center = (rec.x_px, rec.y_px)
    if spec.kind is MarkerKind.NONE:
        return img
    if spec.kind is MarkerKind.CROP:
        return crop_square(img, center, spec.crop_side)
    if spec.kind is MarkerKind.CIRCLE:
        return draw_circle(img, center, rec.diameter_px, spec)
    if spec.kind is MarkerKind.ARROW:
        return draw_arrow(img, center, rec.diameter_px, spec)
    if spec.kind is MarkerKind.CONTOUR:
        if mask is None:
            raise ConfigurationError("contour marker requires a segmentation mask")
        return draw_polyline(img, extract_contour(mask), spec)
    raise ConfigurationError(f"unknown marker kind {spec.kind!r}")
