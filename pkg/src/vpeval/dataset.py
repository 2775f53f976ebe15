"""Nodule manifest parsing and radiograph loading.

The manifest is a six-column CSV (``image_id,x,y,size,size_unit,label``)
describing one annotated lesion per row. Images come in two flavors:

* headerless raw files of big-endian unsigned 16-bit samples holding
  ``raw_bit_depth``-bit data (square side inferred from the byte count), the
  format JSRT distributes its 2048x2048 radiographs in, and
* 8- or 16-bit grayscale PNG.

Intensities are normalized to [0, 1] immediately so everything downstream is
bit-depth agnostic.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

import numpy as np
from PIL import Image

from .errors import FormatError, ManifestParseError, ValidationError
from .image import RasterImage

MANIFEST_COLUMNS = ("image_id", "x", "y", "size", "size_unit", "label")

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

# Extensions probed, in order, when a manifest image_id has no suffix.
IMAGE_SUFFIXES = ("", ".img", ".IMG", ".png", ".PNG")


class Label(str, enum.Enum):
    BENIGN = "benign"
    MALIGNANT = "malignant"


@dataclass(frozen=True)
class NoduleRecord:
    """One annotated lesion: image reference, center, diameter, diagnosis."""

    image_id: str
    x_px: int
    y_px: int
    diameter_px: float
    label: Label


@dataclass
class DatasetConfig:
    manifest_path: Path = Path("manifest.csv")
    image_root: Path = Path(".")
    pixel_spacing_mm: float = 0.175
    invert_grayscale: bool = True
    raw_bit_depth: int = 12

    def __post_init__(self):
        self.manifest_path = Path(self.manifest_path)
        self.image_root = Path(self.image_root)
        if not self.pixel_spacing_mm > 0:
            raise ValidationError(f"pixel_spacing_mm must be > 0, got {self.pixel_spacing_mm}")
        if self.raw_bit_depth not in range(8, 17):
            raise ValidationError(f"raw_bit_depth must be in 8..16, got {self.raw_bit_depth}")


def parse_manifest(text: Union[str, Iterable[str]], cfg: DatasetConfig) -> list[NoduleRecord]:
    """Parse the manifest CSV into one record per data row.

    Sizes in millimeters are converted with diameter_px = size / pixel_spacing_mm.
    Raises ManifestParseError (with line number) for malformed rows and
    ValidationError for bad labels, units, or non-positive sizes.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise ManifestParseError(1, "empty manifest, expected header row") from None
    if tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
        raise ManifestParseError(1, f"expected header {','.join(MANIFEST_COLUMNS)}, got {','.join(header)}")

    records = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(MANIFEST_COLUMNS):
            raise ManifestParseError(line_no, f"expected {len(MANIFEST_COLUMNS)} columns, got {len(row)}")
        image_id, x_s, y_s, size_s, unit, label_s = (c.strip() for c in row)
        if not image_id:
            raise ManifestParseError(line_no, "empty image_id")
        try:
            x_px = int(x_s)
            y_px = int(y_s)
            size = float(size_s)
        except ValueError as exc:
            raise ManifestParseError(line_no, f"bad numeric field: {exc}") from None
        if not math.isfinite(size) or size <= 0:
            raise ValidationError(f"line {line_no}: size must be positive, got {size_s}")
        if unit == "px":
            diameter_px = size
        elif unit == "mm":
            diameter_px = size / cfg.pixel_spacing_mm
        else:
            raise ValidationError(f"line {line_no}: size_unit must be px or mm, got {unit!r}")
        try:
            label = Label(label_s.lower())
        except ValueError:
            raise ValidationError(f"line {line_no}: unknown label {label_s!r}") from None
        records.append(NoduleRecord(image_id, x_px, y_px, diameter_px, label))
    return records


def _load_raw(data: bytes, cfg: DatasetConfig) -> np.ndarray:
    if len(data) % 2 != 0:
        raise FormatError(f"{len(data)} bytes is not a whole number of 16-bit samples", field="file size")
    n = len(data) // 2
    side = math.isqrt(n)
    if side * side != n:
        raise FormatError(f"{n} samples is not a perfect square", field="file size")
    samples = np.frombuffer(data, dtype=">u2").reshape(side, side)
    peak = (1 << cfg.raw_bit_depth) - 1
    top = int(samples.max(initial=0))
    if top > peak:
        raise FormatError(f"value {top} exceeds {cfg.raw_bit_depth}-bit maximum {peak}", field="sample")
    return samples.astype(np.float32) / np.float32(peak)


def _load_png(path: Path) -> np.ndarray:
    with Image.open(path) as pil:
        if pil.mode not in ("L", "I", "I;16"):
            raise FormatError(f"expected 8/16-bit grayscale PNG, got mode {pil.mode}", field="png mode")
        arr = np.asarray(pil)
    if arr.dtype == np.uint8:
        peak = 255
    else:
        peak = 65535
    if arr.min(initial=0) < 0 or arr.max(initial=0) > peak:
        raise FormatError(f"PNG sample outside [0, {peak}]", field="sample")
    return arr.astype(np.float32) / np.float32(peak)


def load_image(path: str | Path, cfg: DatasetConfig) -> RasterImage:
    """Load a raw or PNG radiograph as a single-channel image in [0, 1].

    The format is sniffed from the file content, not the extension. With
    cfg.invert_grayscale the intensities are flipped (v <- 1 - v), the
    convention JSRT raw files need.
    """
    path = Path(path)
    data = path.read_bytes()
    if data[: len(PNG_MAGIC)] == PNG_MAGIC:
        arr = _load_png(path)
    else:
        arr = _load_raw(data, cfg)
    if cfg.invert_grayscale:
        arr = np.float32(1.0) - arr
    return RasterImage(arr)


def resolve_image_path(image_id: str, cfg: DatasetConfig) -> Path:
    """Find the image file for a manifest id, probing known suffixes."""
    for suffix in IMAGE_SUFFIXES:
        candidate = cfg.image_root / (image_id + suffix)
        if candidate.is_file():
            return candidate
    raise ValidationError(f"no image file for id {image_id!r} under {cfg.image_root}")


def load_record_image(rec: NoduleRecord, cfg: DatasetConfig) -> RasterImage:
    """Load a record's image and eagerly check the center lies in bounds."""
    img = load_image(resolve_image_path(rec.image_id, cfg), cfg)
    check_record_bounds(rec, img)
    return img


def check_record_bounds(rec: NoduleRecord, img: RasterImage) -> None:
    if not (0 <= rec.x_px < img.width and 0 <= rec.y_px < img.height):
        raise ValidationError(
            f"record {rec.image_id}: center ({rec.x_px}, {rec.y_px}) outside "
            f"{img.width}x{img.height} image"
        )


def validate_dataset(cfg: DatasetConfig) -> tuple[list[NoduleRecord], list[str]]:
    """Load the manifest and verify every record against its image.

    Returns the parsed records and a list of human-readable problems;
    an empty problem list means the dataset passed validation.
    """
    with open(cfg.manifest_path, newline="", encoding="utf-8") as fh:
        records = parse_manifest(fh, cfg)
    problems = []
    for rec in records:
        try:
            load_record_image(rec, cfg)
        except (ValidationError, FormatError, OSError) as exc:
            problems.append(f"{rec.image_id}: {exc}")
    return records, problems
