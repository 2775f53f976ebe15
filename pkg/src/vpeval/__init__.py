"""Visual-prompt evaluation for zero-shot radiograph classification.

Draws geometric prompts (circle, arrow, lesion contour, crop) on medical
images at native resolution, classifies them zero-shot against templated
text prompts via an external embedding backend, scores the results, and
renders attention-map explanations.
"""

from .backends import BridgeClient, FileTransport, ModelInfo, open_backend
from .config import ExperimentConfig, GridCell, default_grid, load_config
from .dataset import DatasetConfig, Label, NoduleRecord, load_image, parse_manifest
from .errors import (
    CapabilityError,
    ComputationError,
    ConfigurationError,
    ExperimentError,
    FormatError,
    ManifestParseError,
    ProtocolError,
    UndefinedMetricError,
    ValidationError,
    VpevalError,
)
from .experiment import GridResult, run_config, run_grid
from .image import RasterImage
from .legrad import attention_map, overlay_heatmap
from .markers import BoundingBox, MarkerKind, MarkerSpec, Polygon, apply_marker
from .metrics import MetricsReport, auprc, auroc, confusion, full_report
from .preprocess import PreprocessConfig, preprocess
from .zeroshot import PromptSet, ZeroShotConfig, build_prompts, classify

__version__ = "0.1.0"

__all__ = [
    "BridgeClient", "FileTransport", "ModelInfo", "open_backend",
    "ExperimentConfig", "GridCell", "default_grid", "load_config",
    "DatasetConfig", "Label", "NoduleRecord", "load_image", "parse_manifest",
    "CapabilityError", "ComputationError", "ConfigurationError",
    "ExperimentError", "FormatError", "ManifestParseError", "ProtocolError",
    "UndefinedMetricError", "ValidationError", "VpevalError",
    "GridResult", "run_config", "run_grid",
    "RasterImage",
    "attention_map", "overlay_heatmap",
    "BoundingBox", "MarkerKind", "MarkerSpec", "Polygon", "apply_marker",
    "MetricsReport", "auprc", "auroc", "confusion", "full_report",
    "PreprocessConfig", "preprocess",
    "PromptSet", "ZeroShotConfig", "build_prompts", "classify",
    "__version__",
]
