"""Experiment configuration: YAML schema, defaults, grid construction.

Every value has a default except the dataset paths. The default grid is the
eight-row marker/mention table: none, crop, then arrow/circle/contour each
without and with the marker mentioned in the text prompt. Paths in the file
resolve relative to the file's own directory. Unknown keys are rejected so
typos fail loudly instead of silently running defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .dataset import DatasetConfig
from .errors import ConfigurationError
from .markers import MarkerKind, MarkerSpec
from .preprocess import PreprocessConfig
from .zeroshot import DEFAULT_CLASSES, DEFAULT_MENTION_TEMPLATE, DEFAULT_TEMPLATE, ZeroShotConfig

# Row order of the default marker/mention grid.
DEFAULT_GRID_KINDS: tuple[tuple[MarkerKind, bool], ...] = (
    (MarkerKind.NONE, False),
    (MarkerKind.CROP, False),
    (MarkerKind.ARROW, False),
    (MarkerKind.ARROW, True),
    (MarkerKind.CIRCLE, False),
    (MarkerKind.CIRCLE, True),
    (MarkerKind.CONTOUR, False),
    (MarkerKind.CONTOUR, True),
)


@dataclass(frozen=True)
class GridCell:
    """One evaluation configuration: a marker plus whether the text prompt
    names it."""

    marker: MarkerSpec
    mention: bool = False

    def __post_init__(self):
        if self.mention and self.marker.kind in (MarkerKind.NONE, MarkerKind.CROP):
            raise ConfigurationError(
                f"marker kind {self.marker.kind.value!r} cannot be mentioned in the prompt"
            )

    @property
    def row_label(self) -> str:
        return self.marker.kind.value


def default_grid(style: MarkerSpec | None = None) -> tuple[GridCell, ...]:
    base = style if style is not None else MarkerSpec()
    return tuple(
        GridCell(dataclasses.replace(base, kind=kind), mention)
        for kind, mention in DEFAULT_GRID_KINDS
    )


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    grid: tuple[GridCell, ...]
    preprocess: PreprocessConfig = PreprocessConfig()
    zero_shot: ZeroShotConfig = ZeroShotConfig()
    classes: tuple[str, ...] = DEFAULT_CLASSES
    template: str = DEFAULT_TEMPLATE
    mention_template: str = DEFAULT_MENTION_TEMPLATE
    threshold: float = 0.5
    backend: str = ""
    output_dir: Path = Path("out")
    workers: int = 4
    seed: int = 0
    # False once the config pins logit_scale; True lets the backend's
    # exported scale win when its model_info op is available.
    scale_from_model: bool = True

    def __post_init__(self):
        if not self.grid:
            raise ConfigurationError("grid must contain at least one cell")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigurationError(f"threshold must be in [0, 1], got {self.threshold}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        if len(self.classes) < 2:
            raise ConfigurationError(f"need >= 2 classes, got {list(self.classes)}")
        if not 0 <= self.zero_shot.positive_class_index < len(self.classes):
            raise ConfigurationError(
                f"positive_class_index {self.zero_shot.positive_class_index} out of range"
            )


def _section(data: Mapping[str, Any], name: str, allowed: set[str]) -> dict[str, Any]:
    raw = data.get(name, {})
    if raw is None:
        raw = {}
    if not isinstance(raw, Mapping):
        raise ConfigurationError(f"section {name!r} must be a mapping, got {type(raw).__name__}")
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigurationError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return dict(raw)


def _marker_spec(kind: MarkerKind, style: dict[str, Any], overrides: Mapping[str, Any]) -> MarkerSpec:
    merged = {**style, **overrides}
    merged.pop("kind", None)
    if "color" in merged:
        merged["color"] = tuple(merged["color"])
    try:
        return MarkerSpec(kind=kind, **merged)
    except TypeError as exc:
        raise ConfigurationError(f"bad marker settings: {exc}") from None


def config_from_mapping(data: Mapping[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    if not isinstance(data, Mapping):
        raise ConfigurationError(f"config root must be a mapping, got {type(data).__name__}")
    top_keys = {
        "dataset", "marker", "preprocess", "prompts", "zero_shot", "grid",
        "backend", "output_dir", "workers", "seed", "threshold",
    }
    unknown = set(data) - top_keys
    if unknown:
        raise ConfigurationError(f"unknown top-level keys: {sorted(unknown)}")
    base = Path(base_dir) if base_dir is not None else Path(".")

    def _path(value: Any) -> Path:
        p = Path(str(value))
        return p if p.is_absolute() else base / p

    ds = _section(data, "dataset", {
        "manifest", "image_root", "pixel_spacing_mm", "invert_grayscale", "raw_bit_depth",
    })
    if "manifest" not in ds or "image_root" not in ds:
        raise ConfigurationError("dataset.manifest and dataset.image_root are required")
    dataset = DatasetConfig(
        manifest_path=_path(ds["manifest"]),
        image_root=_path(ds["image_root"]),
        pixel_spacing_mm=float(ds.get("pixel_spacing_mm", 0.175)),
        invert_grayscale=bool(ds.get("invert_grayscale", True)),
        raw_bit_depth=int(ds.get("raw_bit_depth", 12)),
    )

    marker_style = _section(data, "marker", {
        "color", "stroke_width_px", "scale_factor", "arrow_shaft_mult",
        "arrow_head_mult", "arrow_half_width_mult", "crop_side",
    })

    pp = _section(data, "preprocess", {"target_side", "mean", "std", "resize_kernel"})
    preprocess = PreprocessConfig(
        target_side=int(pp.get("target_side", 224)),
        mean=tuple(pp.get("mean", PreprocessConfig().mean)),
        std=tuple(pp.get("std", PreprocessConfig().std)),
        resize_kernel=str(pp.get("resize_kernel", "bicubic")),
    )

    pr = _section(data, "prompts", {"classes", "template", "mention_template"})
    classes = tuple(str(c) for c in pr.get("classes", DEFAULT_CLASSES))

    zs = _section(data, "zero_shot", {"logit_scale", "positive_class_index"})
    scale_from_model = "logit_scale" not in zs
    zero_shot = ZeroShotConfig(
        logit_scale=float(zs.get("logit_scale", 100.0)),
        positive_class_index=int(zs.get("positive_class_index", 1)),
    )

    raw_grid = data.get("grid")
    if raw_grid is None:
        grid = default_grid(_marker_spec(MarkerKind.NONE, marker_style, {}))
    else:
        if not isinstance(raw_grid, list) or not raw_grid:
            raise ConfigurationError("grid must be a non-empty list of cells")
        cells = []
        for i, entry in enumerate(raw_grid):
            if not isinstance(entry, Mapping) or "marker" not in entry:
                raise ConfigurationError(f"grid[{i}] must be a mapping with a 'marker' key")
            extra = {k: v for k, v in entry.items() if k not in ("marker", "mention")}
            try:
                kind = MarkerKind(str(entry["marker"]))
            except ValueError:
                raise ConfigurationError(
                    f"grid[{i}].marker {entry['marker']!r} is not one of "
                    f"{[k.value for k in MarkerKind]}"
                ) from None
            cells.append(GridCell(
                _marker_spec(kind, marker_style, extra),
                mention=bool(entry.get("mention", False)),
            ))
        grid = tuple(cells)

    backend = str(data.get("backend", ""))
    if backend.startswith("file:"):
        # Replay stores live next to the config, like every other path here.
        backend = f"file:{_path(backend[len('file:'):])}"

    return ExperimentConfig(
        dataset=dataset,
        grid=grid,
        preprocess=preprocess,
        zero_shot=zero_shot,
        classes=classes,
        template=str(pr.get("template", DEFAULT_TEMPLATE)),
        mention_template=str(pr.get("mention_template", DEFAULT_MENTION_TEMPLATE)),
        threshold=float(data.get("threshold", 0.5)),
        backend=backend,
        output_dir=_path(data.get("output_dir", "out")),
        workers=int(data.get("workers", 4)),
        seed=int(data.get("seed", 0)),
        scale_from_model=scale_from_model,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text("utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {p}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed YAML in {p}: {exc}") from exc
    if data is None:
        data = {}
    return config_from_mapping(data, base_dir=p.parent)
