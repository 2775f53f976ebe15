"""Text prompt construction and zero-shot classification.

A class prompt is the template with the class name substituted, optionally
followed by a mention of the drawn marker ("... indicated by a red circle").
Classification embeds image and prompts, scales their cosine similarities by
the model's logit scale, and applies a numerically stable softmax.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ComputationError, ConfigurationError, ValidationError
from .markers import MarkerKind

DEFAULT_TEMPLATE = "A chest x-ray with a {class} lung nodule"
DEFAULT_MENTION_TEMPLATE = " indicated by a red {annotation}"
DEFAULT_CLASSES = ("benign", "malignant")

# Marker kinds that have a word to put in the text prompt.
ANNOTATION_WORDS = {
    MarkerKind.CIRCLE: "circle",
    MarkerKind.ARROW: "arrow",
    MarkerKind.CONTOUR: "contour",
}


@dataclass(frozen=True)
class PromptSet:
    """Rendered class prompts; index i corresponds to class i everywhere."""

    class_names: tuple[str, ...]
    template: str
    marker_mention: Optional[str]
    rendered: tuple[str, ...]


@dataclass(frozen=True)
class ZeroShotConfig:
    logit_scale: float = 100.0
    positive_class_index: int = 1

    def __post_init__(self):
        if not self.logit_scale > 0:
            raise ValidationError(f"logit_scale must be > 0, got {self.logit_scale}")


@dataclass(frozen=True)
class ClassProbs:
    """Similarity scores, softmax probabilities, and the argmax decision."""

    scores: tuple[float, ...]
    probs: tuple[float, ...]
    decision: int


def build_prompts(
    classes: Sequence[str],
    marker: Optional[MarkerKind] = None,
    template: str = DEFAULT_TEMPLATE,
    mention_template: str = DEFAULT_MENTION_TEMPLATE,
) -> PromptSet:
    """Render one prompt per class; marker != None appends its mention.

    Marker kinds without an annotation word (none, crop) cannot be
    mentioned and raise ConfigurationError.
    """
    if not classes:
        raise ValidationError("class list must be non-empty")
    mention = None
    if marker is not None:
        word = ANNOTATION_WORDS.get(MarkerKind(marker))
        if word is None:
            raise ConfigurationError(f"marker kind {MarkerKind(marker).value!r} has no annotation word")
        mention = mention_template.format_map({"annotation": word})
    rendered = []
    for name in classes:
        prompt = template.format_map({"class": name})
        if mention is not None:
            prompt += mention
        if not prompt:
            raise ValidationError(f"empty prompt rendered for class {name!r}")
        rendered.append(prompt)
    return PromptSet(tuple(classes), template, mention, tuple(rendered))


def similarity(img_emb: np.ndarray, txt_emb: np.ndarray, cfg: ZeroShotConfig) -> float:
    """Scaled cosine similarity; both embeddings must be unit-normalized."""
    a = np.asarray(img_emb, dtype=np.float64)
    b = np.asarray(txt_emb, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"embedding dims differ: {a.shape} vs {b.shape}")
    return float(cfg.logit_scale * np.dot(a, b))


def classify(
    img_emb: np.ndarray, prompt_embs: Sequence[np.ndarray], cfg: ZeroShotConfig
) -> ClassProbs:
    """Softmax distribution over the scaled similarities, with argmax decision."""
    if len(prompt_embs) < 2:
        raise ValidationError(f"need >= 2 class embeddings, got {len(prompt_embs)}")
    scores = np.array([similarity(img_emb, t, cfg) for t in prompt_embs], dtype=np.float64)
    if not np.isfinite(scores).all():
        raise ComputationError(f"non-finite similarity scores: {scores}")
    shifted = scores - scores.max()
    exp = np.exp(shifted)
    probs = exp / exp.sum()
    return ClassProbs(tuple(scores.tolist()), tuple(probs.tolist()), int(np.argmax(scores)))


def malignancy_score(result: ClassProbs, cfg: ZeroShotConfig) -> float:
    """Probability of the positive (malignant) class, for ranking metrics."""
    idx = cfg.positive_class_index
    if not 0 <= idx < len(result.probs):
        raise ConfigurationError(
            f"positive_class_index {idx} out of range for {len(result.probs)} classes"
        )
    return result.probs[idx]
