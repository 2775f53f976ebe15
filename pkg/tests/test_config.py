"""YAML config loading: defaults, the 8-row grid, and typo rejection."""

import textwrap
from pathlib import Path

import pytest

from vpeval.config import (
    DEFAULT_GRID_KINDS,
    ExperimentConfig,
    GridCell,
    config_from_mapping,
    default_grid,
    load_config,
)
from vpeval.dataset import DatasetConfig
from vpeval.errors import ConfigurationError
from vpeval.markers import MarkerKind, MarkerSpec

MINIMAL = {"dataset": {"manifest": "m.csv", "image_root": "imgs"}}


def write_config(tmp_path, text) -> Path:
    path = tmp_path / "config.yaml"
    path.write_text(textwrap.dedent(text))
    return path


class TestDefaultGrid:
    def test_eight_rows_in_table_order(self):
        grid = default_grid()
        assert len(grid) == 8
        assert [(c.marker.kind, c.mention) for c in grid] == list(DEFAULT_GRID_KINDS)

    def test_order_is_none_crop_then_marker_pairs(self):
        kinds = [c.marker.kind for c in default_grid()]
        assert kinds == [
            MarkerKind.NONE,
            MarkerKind.CROP,
            MarkerKind.ARROW,
            MarkerKind.ARROW,
            MarkerKind.CIRCLE,
            MarkerKind.CIRCLE,
            MarkerKind.CONTOUR,
            MarkerKind.CONTOUR,
        ]

    def test_style_propagates_to_every_cell(self):
        grid = default_grid(MarkerSpec(stroke_width_px=4, scale_factor=3.0))
        assert all(c.marker.stroke_width_px == 4 for c in grid)
        assert all(c.marker.scale_factor == 3.0 for c in grid)

    def test_mention_requires_a_mentionable_marker(self):
        with pytest.raises(ConfigurationError, match="cannot be mentioned"):
            GridCell(MarkerSpec(kind=MarkerKind.CROP), mention=True)
        with pytest.raises(ConfigurationError, match="cannot be mentioned"):
            GridCell(MarkerSpec(kind=MarkerKind.NONE), mention=True)


class TestMapping:
    def test_minimal_config_gets_defaults(self):
        cfg = config_from_mapping(MINIMAL)
        assert cfg.threshold == 0.5
        assert cfg.workers == 4
        assert cfg.classes == ("benign", "malignant")
        assert cfg.zero_shot.logit_scale == 100.0
        assert cfg.scale_from_model is True
        assert len(cfg.grid) == 8
        assert cfg.preprocess.target_side == 224

    def test_dataset_paths_required(self):
        with pytest.raises(ConfigurationError, match="required"):
            config_from_mapping({"dataset": {"manifest": "m.csv"}})
        with pytest.raises(ConfigurationError, match="required"):
            config_from_mapping({})

    def test_pinned_logit_scale_disables_model_scale(self):
        cfg = config_from_mapping({**MINIMAL, "zero_shot": {"logit_scale": 42.0}})
        assert cfg.zero_shot.logit_scale == 42.0
        assert cfg.scale_from_model is False

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigurationError, match="unknown top-level"):
            config_from_mapping({**MINIMAL, "naem": "oops"})

    def test_unknown_section_key(self):
        data = {"dataset": {"manifest": "m", "image_root": "i", "pixel_size": 1}}
        with pytest.raises(ConfigurationError, match="unknown keys in 'dataset'"):
            config_from_mapping(data)

    def test_marker_style_applies_to_grid(self):
        data = {**MINIMAL, "marker": {"stroke_width_px": 2, "color": [0.0, 1.0, 0.0]}}
        cfg = config_from_mapping(data)
        assert all(c.marker.stroke_width_px == 2 for c in cfg.grid)
        assert cfg.grid[0].marker.color == (0.0, 1.0, 0.0)

    def test_custom_grid(self):
        data = {
            **MINIMAL,
            "grid": [
                {"marker": "circle", "mention": True, "scale_factor": 2.0},
                {"marker": "none"},
            ],
        }
        cfg = config_from_mapping(data)
        assert len(cfg.grid) == 2
        assert cfg.grid[0].marker.kind is MarkerKind.CIRCLE
        assert cfg.grid[0].marker.scale_factor == 2.0
        assert cfg.grid[0].mention is True
        assert cfg.grid[1].marker.kind is MarkerKind.NONE

    def test_custom_grid_bad_marker_name(self):
        data = {**MINIMAL, "grid": [{"marker": "squiggle"}]}
        with pytest.raises(ConfigurationError, match="squiggle"):
            config_from_mapping(data)

    def test_custom_grid_must_be_nonempty_list(self):
        with pytest.raises(ConfigurationError, match="non-empty"):
            config_from_mapping({**MINIMAL, "grid": []})

    def test_grid_cell_needs_marker_key(self):
        with pytest.raises(ConfigurationError, match="grid\\[0\\]"):
            config_from_mapping({**MINIMAL, "grid": [{"mention": True}]})

    def test_mention_on_crop_rejected_from_mapping(self):
        data = {**MINIMAL, "grid": [{"marker": "crop", "mention": True}]}
        with pytest.raises(ConfigurationError, match="cannot be mentioned"):
            config_from_mapping(data)

    def test_bad_marker_setting_name(self):
        data = {**MINIMAL, "marker": {"stroke": 3}}
        with pytest.raises(ConfigurationError, match="unknown keys in 'marker'"):
            config_from_mapping(data)

    def test_threshold_range(self):
        with pytest.raises(ConfigurationError, match="threshold"):
            config_from_mapping({**MINIMAL, "threshold": 1.5})

    def test_workers_positive(self):
        with pytest.raises(ConfigurationError, match="workers"):
            config_from_mapping({**MINIMAL, "workers": 0})

    def test_positive_class_index_in_range(self):
        data = {**MINIMAL, "zero_shot": {"positive_class_index": 5}}
        with pytest.raises(ConfigurationError, match="out of range"):
            config_from_mapping(data)

    def test_custom_prompts(self):
        data = {
            **MINIMAL,
            "prompts": {
                "classes": ["healthy", "diseased"],
                "template": "scan of a {class} lung",
            },
        }
        cfg = config_from_mapping(data)
        assert cfg.classes == ("healthy", "diseased")
        assert cfg.template == "scan of a {class} lung"


class TestPaths:
    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        path = write_config(
            tmp_path,
            """
            dataset:
              manifest: data/m.csv
              image_root: data/images
            output_dir: results
            """,
        )
        cfg = load_config(path)
        assert cfg.dataset.manifest_path == tmp_path / "data/m.csv"
        assert cfg.dataset.image_root == tmp_path / "data/images"
        assert cfg.output_dir == tmp_path / "results"

    def test_absolute_paths_kept(self, tmp_path):
        path = write_config(
            tmp_path,
            """
            dataset:
              manifest: /abs/m.csv
              image_root: /abs/images
            """,
        )
        cfg = load_config(path)
        assert cfg.dataset.manifest_path == Path("/abs/m.csv")


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="cannot read"):
            load_config(tmp_path / "absent.yaml")

    def test_malformed_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("dataset: [unclosed")
        with pytest.raises(ConfigurationError, match="malformed YAML"):
            load_config(path)

    def test_empty_file_means_empty_mapping(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        with pytest.raises(ConfigurationError, match="required"):
            load_config(path)

    def test_full_round_trip(self, tmp_path):
        path = write_config(
            tmp_path,
            """
            dataset:
              manifest: m.csv
              image_root: imgs
              invert_grayscale: false
            marker:
              stroke_width_px: 6
            zero_shot:
              logit_scale: 75.5
            threshold: 0.4
            workers: 2
            seed: 7
            backend: file:backend
            """,
        )
        cfg = load_config(path)
        assert cfg.dataset.invert_grayscale is False
        assert cfg.grid[0].marker.stroke_width_px == 6
        assert cfg.zero_shot.logit_scale == 75.5
        assert cfg.threshold == 0.4
        assert cfg.workers == 2
        assert cfg.seed == 7
        # Relative replay paths anchor to the config dir, not the CWD.
        assert cfg.backend == f"file:{tmp_path / 'backend'}"


class TestExperimentConfigValidation:
    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigurationError, match="grid"):
            ExperimentConfig(dataset=DatasetConfig(), grid=())

    def test_needs_two_classes(self):
        with pytest.raises(ConfigurationError, match="classes"):
            ExperimentConfig(
                dataset=DatasetConfig(), grid=default_grid(), classes=("only",)
            )
