"""End-to-end orchestration: single runs, the marker/mention grid, reports.

One grid cell = load every record, draw its marker, preprocess, embed,
classify, then score the whole dataset. Images inside a cell are processed
by a bounded thread pool but reduced in dataset order, so outputs are
deterministic regardless of scheduling. A failing record aborts its cell
with the record id in the message; a failing cell does not abort the grid.
"""

from __future__ import annotations

import csv
import dataclasses
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import wire
from .backends import BridgeClient
from .config import ExperimentConfig, GridCell
from .dataset import Label, NoduleRecord, check_record_bounds, load_record_image, parse_manifest
from .errors import CapabilityError, ConfigurationError, ExperimentError, VpevalError
from .image import RasterImage, write_png
from .legrad import attention_map, overlay_heatmap
from .markers import MarkerKind, apply_marker, nodule_bbox
from .metrics import METRIC_COLUMNS, MetricsReport, full_report
from .preprocess import preprocess
from .zeroshot import PromptSet, ZeroShotConfig, build_prompts, classify, malignancy_score

GRID_CSV_COLUMNS = ("visual_prompt", "marker_in_prompt") + METRIC_COLUMNS + ("n_pos", "n_neg")
PER_IMAGE_COLUMNS = ("visual_prompt", "marker_in_prompt", "image_id", "label", "score", "decision")


@dataclass(frozen=True)
class ImageScore:
    image_id: str
    label: int
    score: float
    decision: int


@dataclass(frozen=True)
class CellResult:
    cell: GridCell
    report: Optional[MetricsReport]
    scores: tuple[ImageScore, ...]
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class GridResult:
    rows: tuple[CellResult, ...]

    @property
    def all_ok(self) -> bool:
        return all(row.ok for row in self.rows)


def load_records(cfg: ExperimentConfig) -> list[NoduleRecord]:
    with open(cfg.dataset.manifest_path, newline="", encoding="utf-8") as fh:
        return parse_manifest(fh, cfg.dataset)


def resolve_zero_shot(cfg: ExperimentConfig, client: BridgeClient) -> ZeroShotConfig:
    """Prefer the backend's exported logit scale unless the config pins one;
    a backend without the capability falls back to the config value."""
    if not cfg.scale_from_model:
        return cfg.zero_shot
    try:
        info = client.model_info()
    except CapabilityError:
        return cfg.zero_shot
    return dataclasses.replace(cfg.zero_shot, logit_scale=info.logit_scale)


def prompts_for_cell(cfg: ExperimentConfig, cell: GridCell) -> PromptSet:
    marker = cell.marker.kind if cell.mention else None
    return build_prompts(cfg.classes, marker, cfg.template, cfg.mention_template)


def fetch_mask(
    client: BridgeClient, img: RasterImage, rec: NoduleRecord, scale_factor: float
) -> RasterImage:
    """Box-prompted segmentation of the lesion, binarized at 0.5."""
    gray = np.ascontiguousarray(img.pixels[:, :, 0])
    box = nodule_bbox((rec.x_px, rec.y_px), rec.diameter_px, scale_factor)
    box = box.clipped(img.width, img.height)
    mask = client.segment_box(gray, box)
    return RasterImage((np.asarray(mask) >= 0.5).astype(np.float32))


def evaluate_record(
    client: BridgeClient,
    cfg: ExperimentConfig,
    cell: GridCell,
    rec: NoduleRecord,
    text_embs: Sequence[np.ndarray],
    zs: ZeroShotConfig,
) -> ImageScore:
    img = load_record_image(rec, cfg.dataset)
    check_record_bounds(rec, img)
    mask = None
    if cell.marker.kind is MarkerKind.CONTOUR:
        mask = fetch_mask(client, img, rec, cell.marker.scale_factor)
    annotated = apply_marker(img, rec, cell.marker, mask)
    tensor = preprocess(annotated, cfg.preprocess)
    emb = client.embed_image(tensor)
    result = classify(emb, text_embs, zs)
    score = malignancy_score(result, zs)
    label = int(rec.label is Label.MALIGNANT)
    return ImageScore(rec.image_id, label, score, int(score >= cfg.threshold))


def run_config(
    cfg: ExperimentConfig,
    client: BridgeClient,
    cell: GridCell,
    records: Optional[Sequence[NoduleRecord]] = None,
    zs: Optional[ZeroShotConfig] = None,
) -> CellResult:
    """Evaluate one grid cell over the whole dataset.

    Any record failure aborts the cell with the record id in the message —
    no partial silent results.
    """
    if records is None:
        records = load_records(cfg)
    if not records:
        raise ExperimentError("dataset manifest contains no records")
    if zs is None:
        zs = resolve_zero_shot(cfg, client)
    prompts = prompts_for_cell(cfg, cell)
    text_embs = [client.embed_text(p) for p in prompts.rendered]

    def one(rec: NoduleRecord) -> ImageScore:
        try:
            return evaluate_record(client, cfg, cell, rec, text_embs, zs)
        except VpevalError as exc:
            raise ExperimentError(f"record {rec.image_id}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        scores = tuple(pool.map(one, records))

    report = full_report(
        [s.label for s in scores], [s.score for s in scores], cfg.threshold
    )
    return CellResult(cell, report, scores)


def run_grid(cfg: ExperimentConfig, client: BridgeClient) -> GridResult:
    """All grid cells in order; failed cells become failed rows, the rest run."""
    records = load_records(cfg)
    zs = resolve_zero_shot(cfg, client)
    rows = []
    for cell in cfg.grid:
        try:
            rows.append(run_config(cfg, client, cell, records=records, zs=zs))
        except VpevalError as exc:
            rows.append(CellResult(cell, None, (), error=str(exc)))
    return GridResult(tuple(rows))


def _mention_cell(cell: GridCell) -> str:
    return "yes" if cell.mention else "no"


def grid_csv(result: GridResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(GRID_CSV_COLUMNS)
    for row in result.rows:
        lead = [row.cell.row_label, _mention_cell(row.cell)]
        if row.report is None:
            writer.writerow(lead + [""] * (len(METRIC_COLUMNS) + 2))
        else:
            writer.writerow(
                lead
                + [repr(v) for v in row.report.csv_values()]
                + [row.report.n_pos, row.report.n_neg]
            )
    return buf.getvalue()


def per_image_csv(result: GridResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PER_IMAGE_COLUMNS)
    for row in result.rows:
        for s in row.scores:
            writer.writerow(
                [row.cell.row_label, _mention_cell(row.cell), s.image_id,
                 s.label, repr(s.score), s.decision]
            )
    return buf.getvalue()


def markdown_table(result: GridResult) -> str:
    """Human-readable grid in the layout of the results table: blank cell
    for the unmarked row, check marks for mentions, four decimals."""
    headers = ["Visual Prompt", "Marker in prompt", "AUROC", "AUPRC", "F1",
               "Precision", "Recall", "Accuracy", "Balanced Accuracy", "MCC"]
    lines = ["| " + " | ".join(headers) + " |",
             "|" + "---|" * len(headers)]
    notes = []
    for row in result.rows:
        kind = row.cell.marker.kind
        label = "" if kind is MarkerKind.NONE else kind.value.capitalize()
        mention = "✓" if row.cell.mention else ""
        if row.report is None:
            cells = ["—"] * len(METRIC_COLUMNS)
            notes.append(f"- {row.cell.row_label} ({_mention_cell(row.cell)}): {row.error}")
        else:
            cells = [f"{v:.4f}" for v in row.report.csv_values()]
        lines.append("| " + " | ".join([label, mention] + cells) + " |")
    if notes:
        lines.append("")
        lines.append("Failed rows:")
        lines.extend(notes)
    return "\n".join(lines) + "\n"


def write_grid_outputs(result: GridResult, out_dir: Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "grid_csv": out_dir / "grid.csv",
        "per_image_csv": out_dir / "per_image.csv",
        "grid_md": out_dir / "grid.md",
    }
    paths["grid_csv"].write_text(grid_csv(result), "utf-8")
    paths["per_image_csv"].write_text(per_image_csv(result), "utf-8")
    paths["grid_md"].write_text(markdown_table(result), "utf-8")
    return paths


def explain(
    cfg: ExperimentConfig,
    client: BridgeClient,
    record_id: str,
    cell: GridCell,
    class_index: Optional[int] = None,
    out_dir: Optional[Path] = None,
) -> list[Path]:
    """Attention-map overlays for one record: a PNG per requested class,
    the raw patch-grid heatmap dumped alongside as a tensor file."""
    records = {r.image_id: r for r in load_records(cfg)}
    rec = records.get(record_id)
    if rec is None:
        raise ExperimentError(f"record {record_id!r} not in manifest")
    if class_index is not None and not 0 <= class_index < len(cfg.classes):
        raise ConfigurationError(
            f"class index {class_index} out of range for {len(cfg.classes)} classes"
        )
    indices = range(len(cfg.classes)) if class_index is None else [class_index]

    img = load_record_image(rec, cfg.dataset)
    check_record_bounds(rec, img)
    mask = None
    if cell.marker.kind is MarkerKind.CONTOUR:
        mask = fetch_mask(client, img, rec, cell.marker.scale_factor)
    annotated = apply_marker(img, rec, cell.marker, mask)
    tensor = preprocess(annotated, cfg.preprocess)
    prompts = prompts_for_cell(cfg, cell)

    target = Path(out_dir) if out_dir is not None else cfg.output_dir
    target.mkdir(parents=True, exist_ok=True)
    tag = cell.row_label + ("_mention" if cell.mention else "")
    written = []
    for i in indices:
        grads = client.attn_grads(tensor, prompts.rendered[i])
        heat = attention_map(grads)
        overlay = overlay_heatmap(annotated, heat)
        stem = f"{record_id}_{tag}_{cfg.classes[i]}"
        png = target / f"{stem}.png"
        write_png(overlay, png)
        raw = target / f"{stem}_heatmap.vpt"
        raw.write_bytes(wire.encode_tensor(heat.astype(np.float32)))
        written.extend([png, raw])
    return written


def render_annotated(
    cfg: ExperimentConfig, client: Optional[BridgeClient], out_dir: Path
) -> tuple[list[Path], list[str]]:
    """Dump each record once per distinct marker style in the grid.

    Mention-only variants draw identical pixels, so they are collapsed.
    Failures are collected, not raised, mirroring grid behavior.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    markers = list(dict.fromkeys(cell.marker for cell in cfg.grid))
    records = load_records(cfg)
    written: list[Path] = []
    problems: list[str] = []
    for marker in markers:
        for rec in records:
            try:
                img = load_record_image(rec, cfg.dataset)
                check_record_bounds(rec, img)
                mask = None
                if marker.kind is MarkerKind.CONTOUR:
                    if client is None:
                        raise ConfigurationError("contour rendering needs a backend")
                    mask = fetch_mask(client, img, rec, marker.scale_factor)
                annotated = apply_marker(img, rec, marker, mask)
                path = out_dir / f"{rec.image_id}_{marker.kind.value}.png"
                write_png(annotated, path)
                written.append(path)
            except VpevalError as exc:
                problems.append(f"{rec.image_id} ({marker.kind.value}): {exc}")
    return written, problems
