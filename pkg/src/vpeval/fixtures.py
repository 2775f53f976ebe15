"""Deterministic synthetic fixtures: tiny dataset plus a recorded backend.

Builds a miniature experiment a test (or a demo) can run offline: noisy
grayscale images with a disk lesion, a manifest, and a replay store whose
hand-built embeddings separate the classes perfectly — every malignant image
maps to one unit vector, every benign image to an orthogonal one, and the
text prompts map to the same pair. All randomness flows from the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends import BridgeClient, FileTransport, canonical_key
from .config import ExperimentConfig, load_config
from .dataset import load_image
from .errors import ValidationError
from .experiment import fetch_mask, load_records, prompts_for_cell
from .image import RasterImage, write_png
from .markers import MarkerKind, apply_marker, nodule_bbox
from .preprocess import preprocess
from .wire import Op

EMBED_DIM = 8
# Small transformer geometry for the recorded gradients: 17 tokens = 4x4
# patch grid plus the class token.
ATTN_LAYERS = 2
ATTN_HEADS = 2
ATTN_TOKENS = 17

_CONFIG_TEMPLATE = """\
dataset:
  manifest: manifest.csv
  image_root: images
  invert_grayscale: false
backend: file:backend
output_dir: out
workers: 2
seed: {seed}
"""


@dataclass(frozen=True)
class SyntheticFixture:
    root: Path
    config_path: Path
    config: ExperimentConfig
    explain_record: str
    # Grid index of the cell whose attention gradients were recorded.
    explain_cell_index: int
    # (row, col) of the hot patch those gradients encode.
    hot_patch: tuple[int, int]


def _class_embeddings() -> tuple[np.ndarray, np.ndarray]:
    e0 = np.zeros(EMBED_DIM, dtype=np.float32)
    e1 = np.zeros(EMBED_DIM, dtype=np.float32)
    e0[0] = 1.0
    e1[1] = 1.0
    return e0, e1


def _disk_mask(side: int, cx: int, cy: int, diameter: float) -> np.ndarray:
    ys, xs = np.mgrid[0:side, 0:side]
    r2 = (xs - cx) ** 2 + (ys - cy) ** 2
    return (r2 <= (diameter / 2.0) ** 2).astype(np.float32)


def _hot_token(cx: int, cy: int, side: int, target: int) -> tuple[int, int, int]:
    """Patch-grid cell containing the lesion center after preprocessing."""
    grid = int(round((ATTN_TOKENS - 1) ** 0.5))
    patch = target // grid
    scale = target / side
    px = min(grid - 1, int(cx * scale) // patch)
    py = min(grid - 1, int(cy * scale) // patch)
    return py, px, 1 + py * grid + px


def build_synthetic_experiment(
    root: str | Path, n_per_class: int = 2, side: int = 256, seed: int = 0
) -> SyntheticFixture:
    if n_per_class < 1:
        raise ValidationError(f"n_per_class must be >= 1, got {n_per_class}")
    root = Path(root)
    images_dir = root / "images"
    backend_dir = root / "backend"
    for d in (images_dir, backend_dir):
        d.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    manifest_rows = ["image_id,x,y,size,size_unit,label"]
    plan = []
    for label, base in (("benign", 0.30), ("malignant", 0.55)):
        for i in range(n_per_class):
            image_id = f"{label}_{i:03d}"
            cx = int(side * 0.38 + 17 * i)
            cy = int(side * 0.46 + 11 * i)
            diameter = 18 + 2 * i
            pixels = base + 0.08 * rng.random((side, side))
            dy, dx = np.mgrid[0:side, 0:side]
            lesion = ((dx - cx) ** 2 + (dy - cy) ** 2) <= (diameter / 2.0) ** 2
            pixels[lesion] += 0.25
            write_png(
                RasterImage(np.clip(pixels, 0.0, 1.0).astype(np.float32)),
                images_dir / f"{image_id}.png",
            )
            manifest_rows.append(f"{image_id},{cx},{cy},{diameter},px,{label}")
            plan.append((image_id, cx, cy, float(diameter), label))
    (root / "manifest.csv").write_text("\n".join(manifest_rows) + "\n", "utf-8")

    config_path = root / "config.yaml"
    config_path.write_text(_CONFIG_TEMPLATE.format(seed=seed), "utf-8")
    cfg = load_config(config_path)

    store = FileTransport(backend_dir)
    store.put(
        canonical_key(Op.MODEL_INFO),
        [np.array([EMBED_DIM, 100.0, ATTN_LAYERS, ATTN_HEADS, ATTN_TOKENS], dtype=np.float32)],
    )
    e_benign, e_malignant = _class_embeddings()

    # Text embeddings for every prompt any grid cell will render.
    for cell in cfg.grid:
        prompts = prompts_for_cell(cfg, cell)
        for idx, prompt in enumerate(prompts.rendered):
            emb = e_malignant if idx == cfg.zero_shot.positive_class_index else e_benign
            store.put(canonical_key(Op.EMBED_TEXT, prompt), [emb])

    # Segmentation masks first: the annotation pass below replays them.
    records = load_records(cfg)
    loaded = {}
    for rec in records:
        img = load_image(images_dir / f"{rec.image_id}.png", cfg.dataset)
        loaded[rec.image_id] = img
        gray = np.ascontiguousarray(img.pixels[:, :, 0])
        box = nodule_bbox((rec.x_px, rec.y_px), rec.diameter_px, cfg.grid[0].marker.scale_factor)
        box = box.clipped(img.width, img.height)
        mask = _disk_mask(side, rec.x_px, rec.y_px, rec.diameter_px)
        store.put(canonical_key(Op.SEGMENT_BOX, box.as_csv(), gray), [mask])

    # Image embeddings keyed on the exact preprocessed tensors the run will
    # produce, replayed through the same pipeline code.
    client = BridgeClient(FileTransport(backend_dir))
    explain_record = next(r.image_id for r in records if r.label.value == "malignant")
    explain_cell_index = next(
        i for i, c in enumerate(cfg.grid)
        if c.marker.kind is MarkerKind.CIRCLE and c.mention
    )
    hot = None
    for cell in cfg.grid:
        for rec in records:
            img = loaded[rec.image_id]
            mask = None
            if cell.marker.kind is MarkerKind.CONTOUR:
                mask = fetch_mask(client, img, rec, cell.marker.scale_factor)
            annotated = apply_marker(img, rec, cell.marker, mask)
            tensor = preprocess(annotated, cfg.preprocess)
            emb = e_malignant if rec.label.value == "malignant" else e_benign
            store.put(canonical_key(Op.EMBED_IMAGE, tensor=tensor), [emb])

            if cell is cfg.grid[explain_cell_index] and rec.image_id == explain_record:
                py, px, token = _hot_token(rec.x_px, rec.y_px, side, cfg.preprocess.target_side)
                hot = (py, px)
                grads = np.zeros(
                    (ATTN_LAYERS, ATTN_HEADS, ATTN_TOKENS, ATTN_TOKENS), dtype=np.float32
                )
                grads[:, :, :, token] = 1.0
                for prompt in prompts_for_cell(cfg, cell).rendered:
                    store.put(canonical_key(Op.ATTN_GRADS, prompt, tensor), [grads])

    assert hot is not None
    return SyntheticFixture(
        root=root,
        config_path=config_path,
        config=cfg,
        explain_record=explain_record,
        explain_cell_index=explain_cell_index,
        hot_patch=hot,
    )
