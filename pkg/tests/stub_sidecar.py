"""In-process / subprocess stand-in for a live model backend.

Serves the framed protocol over stdio with a deterministic synthetic model:
embeddings derive from content hashes, so identical requests always get
identical responses (what record-then-replay tests need), text prompts
containing "malignant" / "benign" pull toward two fixed orthogonal axes,
and image embeddings pick an axis from mean brightness. A prompt of
"__raise__" returns an error response, for error-path tests.

Run: python3 tests/stub_sidecar.py
"""

import hashlib
import sys

import numpy as np

from vpeval import wire
from vpeval.wire import Op

EMBED_DIM = 16
LOGIT_SCALE = 50.0
LAYERS, HEADS, TOKENS = 2, 2, 17
# Mean normalized intensity above this reads as "bright" (the lesion-boosted
# class in the synthetic datasets).
BRIGHTNESS_SPLIT = 0.0


def _seeded(data: bytes) -> np.random.Generator:
    digest = hashlib.sha256(data).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _jittered_axis(axis: int, seed: bytes) -> np.ndarray:
    rng = _seeded(seed)
    vec = 0.1 * rng.standard_normal(EMBED_DIM)
    vec[axis] += 1.0
    return (vec / np.linalg.norm(vec)).astype(np.float32)


def _embed_text(prompt: str) -> np.ndarray:
    axis = 1 if "malignant" in prompt else 0
    return _jittered_axis(axis, b"text:" + prompt.encode("utf-8"))


def _embed_image(tensor: np.ndarray) -> np.ndarray:
    axis = 1 if float(tensor.mean()) > BRIGHTNESS_SPLIT else 0
    return _jittered_axis(axis, b"image:" + tensor.tobytes())


def _attn_grads(tensor: np.ndarray, prompt: str) -> np.ndarray:
    rng = _seeded(b"grads:" + tensor.tobytes() + prompt.encode("utf-8"))
    grads = rng.standard_normal((LAYERS, HEADS, TOKENS, TOKENS))
    return grads.astype(np.float32)


def _segment_box(tensor: np.ndarray, box_csv: str) -> np.ndarray:
    x_min, y_min, x_max, y_max = (float(v) for v in box_csv.split(","))
    h, w = tensor.shape
    mask = np.zeros((h, w), dtype=np.float32)
    r0, r1 = max(0, int(y_min)), min(h, int(np.ceil(y_max)))
    c0, c1 = max(0, int(x_min)), min(w, int(np.ceil(x_max)))
    window = tensor[r0:r1, c0:c1]
    if window.size:
        mask[r0:r1, c0:c1] = (window >= float(window.mean())).astype(np.float32)
    return mask


def handle(body: bytes) -> bytes:
    try:
        op, metadata, tensor = wire.decode_request(body)
        if metadata == "__raise__":
            return wire.encode_response_error("requested failure")
        if op == Op.MODEL_INFO:
            info = np.array([EMBED_DIM, LOGIT_SCALE, LAYERS, HEADS, TOKENS], dtype=np.float32)
            return wire.encode_response_ok([info])
        if op == Op.EMBED_TEXT:
            return wire.encode_response_ok([_embed_text(metadata)])
        if tensor is None:
            return wire.encode_response_error(f"op {op} needs a tensor payload")
        if op == Op.EMBED_IMAGE:
            return wire.encode_response_ok([_embed_image(tensor)])
        if op == Op.ATTN_GRADS:
            return wire.encode_response_ok([_attn_grads(tensor, metadata)])
        if op == Op.SEGMENT_BOX:
            return wire.encode_response_ok([_segment_box(tensor, metadata)])
        return wire.encode_response_error(f"unhandled op {op}")
    except Exception as exc:  # noqa: BLE001 - stub reports, never crashes
        return wire.encode_response_error(f"{type(exc).__name__}: {exc}")


def serve(reader, writer) -> None:
    while True:
        try:
            body = wire.read_frame(reader)
        except Exception:
            return
        writer.write(wire.pack_frame(handle(body)))
        writer.flush()


if __name__ == "__main__":
    serve(sys.stdin.buffer, sys.stdout.buffer)
