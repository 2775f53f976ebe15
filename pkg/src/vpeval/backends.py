"""Model backends behind one framed request/response protocol.

The heavy model (image/text encoders, attention gradients, box-prompted
segmentation) lives out of process. Three transports speak the same wire
protocol: a spawned subprocess over stdio, a TCP socket, and a replay
directory of pre-recorded responses. BridgeClient sits on top and owns
client-side policy: unit renormalization of embeddings, a content-addressed
response cache, and per-op call counters.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import socket
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import wire
from .errors import CapabilityError, ComputationError, ConfigurationError, ProtocolError
from .markers import BoundingBox
from .wire import Op

# Replay directories treat these ops as optional extras: a missing recording
# means the capability was never captured, not that the store is corrupt.
_OPTIONAL_OPS = frozenset({Op.ATTN_GRADS, Op.SEGMENT_BOX, Op.MODEL_INFO})

_OP_NAMES = {
    Op.EMBED_IMAGE: "embed_image",
    Op.EMBED_TEXT: "embed_text",
    Op.ATTN_GRADS: "attn_grads",
    Op.SEGMENT_BOX: "segment_box",
    Op.MODEL_INFO: "model_info",
}


def canonical_key(op: Op, metadata: str = "", tensor: np.ndarray | None = None) -> str:
    """Stable lookup key for a request: text prompts stay readable, image
    payloads collapse to the sha256 of their wire encoding."""
    name = _OP_NAMES[op]
    digest = None
    if tensor is not None:
        digest = hashlib.sha256(wire.encode_tensor(tensor)).hexdigest()
    if op == Op.EMBED_IMAGE:
        return f"{name}:{digest}"
    if op == Op.EMBED_TEXT:
        return f"{name}:{metadata}"
    if op in (Op.ATTN_GRADS, Op.SEGMENT_BOX):
        return f"{name}:{digest}:{metadata}"
    return name


class Transport:
    """Request/response channel; subclasses implement _exchange."""

    def request(self, op: Op, metadata: str = "", tensor: np.ndarray | None = None) -> list[np.ndarray]:
        return self._exchange(op, metadata, tensor)

    def _exchange(self, op: Op, metadata: str, tensor: np.ndarray | None) -> list[np.ndarray]:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self) -> "Transport":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class StreamTransport(Transport):
    """Frames requests onto a pair of binary streams."""

    def __init__(self, reader, writer):
        self._reader = reader
        self._writer = writer

    def _exchange(self, op: Op, metadata: str, tensor: np.ndarray | None) -> list[np.ndarray]:
        body = wire.encode_request(op, metadata, tensor)
        try:
            self._writer.write(wire.pack_frame(body))
            self._writer.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"backend write failed: {exc}") from exc
        return wire.decode_response(wire.read_frame(self._reader))


class SubprocessTransport(StreamTransport):
    """Spawns the backend command and speaks the protocol over its stdio."""

    def __init__(self, command: Sequence[str]):
        if not command:
            raise ConfigurationError("backend command is empty")
        try:
            self._proc = subprocess.Popen(
                list(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        except OSError as exc:
            raise ConfigurationError(f"cannot launch backend {command[0]!r}: {exc}") from exc
        super().__init__(self._proc.stdout, self._proc.stdin)

    def _exchange(self, op: Op, metadata: str, tensor: np.ndarray | None) -> list[np.ndarray]:
        if self._proc.poll() is not None:
            raise ProtocolError(f"backend exited with code {self._proc.returncode}")
        return super()._exchange(op, metadata, tensor)

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


class TcpTransport(StreamTransport):
    def __init__(self, host: str, port: int):
        try:
            self._sock = socket.create_connection((host, port))
        except OSError as exc:
            raise ConfigurationError(f"cannot connect to {host}:{port}: {exc}") from exc
        stream = self._sock.makefile("rwb")
        super().__init__(stream, stream)

    def close(self) -> None:
        self._reader.close()
        self._sock.close()


class FileTransport(Transport):
    """Replay store: a directory of .vpt response files plus an index.json
    mapping canonical request keys to content hashes."""

    INDEX_NAME = "index.json"

    def __init__(self, root: str | Path):
        self.root = Path(root)
        if not self.root.is_dir():
            raise ConfigurationError(f"replay directory {self.root} does not exist")
        index_path = self.root / self.INDEX_NAME
        if index_path.exists():
            try:
                self._index: dict[str, str] = json.loads(index_path.read_text("utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigurationError(f"unreadable index at {index_path}: {exc}") from exc
        else:
            self._index = {}

    def _exchange(self, op: Op, metadata: str, tensor: np.ndarray | None) -> list[np.ndarray]:
        key = canonical_key(op, metadata, tensor)
        name = self._index.get(key)
        if name is None:
            if op in _OPTIONAL_OPS:
                raise CapabilityError(f"replay store has no recording for {key!r}")
            raise ProtocolError(f"replay store is missing required response for {key!r}")
        path = self.root / f"{name}.vpt"
        try:
            blob = path.read_bytes()
        except OSError as exc:
            raise ProtocolError(f"index names {path.name} but it is unreadable: {exc}") from exc
        return wire.read_tensors(blob)

    def put(self, key: str, tensors: Sequence[np.ndarray]) -> str:
        """Record a response under its request key; returns the file stem."""
        name = hashlib.sha256(key.encode("utf-8")).hexdigest()
        blob = b"".join(wire.encode_tensor(t) for t in tensors)
        (self.root / f"{name}.vpt").write_bytes(blob)
        self._index[key] = name
        tmp = self.root / (self.INDEX_NAME + ".tmp")
        tmp.write_text(json.dumps(self._index, indent=1, sort_keys=True), "utf-8")
        tmp.replace(self.root / self.INDEX_NAME)
        return name

    def keys(self) -> list[str]:
        return sorted(self._index)


class RecordingTransport(Transport):
    """Forwards to a live transport and captures every response into a
    FileTransport store for later replay."""

    def __init__(self, inner: Transport, store: FileTransport):
        self.inner = inner
        self.store = store

    def _exchange(self, op: Op, metadata: str, tensor: np.ndarray | None) -> list[np.ndarray]:
        tensors = self.inner.request(op, metadata, tensor)
        self.store.put(canonical_key(op, metadata, tensor), tensors)
        return tensors

    def close(self) -> None:
        self.inner.close()


@dataclass(frozen=True)
class ModelInfo:
    embed_dim: int
    logit_scale: float
    layers: int
    heads: int
    tokens: int


class BridgeClient:
    """Typed facade over a transport.

    Embeddings come back renormalized to unit length in float64; responses
    are cached by canonical request key, and the lock spans the whole miss
    path so concurrent identical requests hit the backend once.
    """

    def __init__(self, transport: Transport):
        self.transport = transport
        self._cache: dict[str, list[np.ndarray]] = {}
        self._lock = threading.Lock()
        self.calls: dict[str, int] = {name: 0 for name in _OP_NAMES.values()}
        self.cache_hits = 0

    def _request(self, op: Op, metadata: str = "", tensor: np.ndarray | None = None) -> list[np.ndarray]:
        key = canonical_key(op, metadata, tensor)
        with self._lock:
            if key in self._cache:
                self.cache_hits += 1
                return self._cache[key]
            tensors = self.transport.request(op, metadata, tensor)
            self.calls[_OP_NAMES[op]] += 1
            self._cache[key] = tensors
            return tensors

    @staticmethod
    def _single(tensors: list[np.ndarray], op: Op, ndim: int) -> np.ndarray:
        if len(tensors) != 1:
            raise ProtocolError(f"{_OP_NAMES[op]} returned {len(tensors)} tensors, expected 1")
        if tensors[0].ndim != ndim:
            raise ProtocolError(
                f"{_OP_NAMES[op]} returned rank {tensors[0].ndim}, expected {ndim}"
            )
        return tensors[0]

    @staticmethod
    def _unit(vec: np.ndarray, what: str) -> np.ndarray:
        v = vec.astype(np.float64)
        norm = float(np.linalg.norm(v))
        if not np.isfinite(norm) or norm == 0.0:
            raise ComputationError(f"{what} embedding has norm {norm}")
        return v / norm

    def embed_image(self, pixels: np.ndarray) -> np.ndarray:
        arr = np.ascontiguousarray(pixels, dtype=np.float32)
        out = self._single(self._request(Op.EMBED_IMAGE, tensor=arr), Op.EMBED_IMAGE, 1)
        return self._unit(out, "image")

    def embed_text(self, prompt: str) -> np.ndarray:
        out = self._single(self._request(Op.EMBED_TEXT, metadata=prompt), Op.EMBED_TEXT, 1)
        return self._unit(out, "text")

    def attn_grads(self, pixels: np.ndarray, prompt: str) -> np.ndarray:
        arr = np.ascontiguousarray(pixels, dtype=np.float32)
        out = self._request(Op.ATTN_GRADS, metadata=prompt, tensor=arr)
        return self._single(out, Op.ATTN_GRADS, 4).astype(np.float64)

    def segment_box(self, pixels: np.ndarray, box: BoundingBox) -> np.ndarray:
        arr = np.ascontiguousarray(pixels, dtype=np.float32)
        if arr.ndim != 2:
            raise ComputationError(f"segmentation expects a 2-D image, got shape {arr.shape}")
        out = self._request(Op.SEGMENT_BOX, metadata=box.as_csv(), tensor=arr)
        mask = self._single(out, Op.SEGMENT_BOX, 2)
        if mask.shape != arr.shape:
            raise ProtocolError(f"mask shape {mask.shape} does not match image {arr.shape}")
        return mask

    def model_info(self) -> ModelInfo:
        out = self._single(self._request(Op.MODEL_INFO), Op.MODEL_INFO, 1)
        if out.size != 5:
            raise ProtocolError(f"model_info returned {out.size} values, expected 5")
        vals = out.astype(np.float64)
        return ModelInfo(
            embed_dim=int(vals[0]),
            logit_scale=float(vals[1]),
            layers=int(vals[2]),
            heads=int(vals[3]),
            tokens=int(vals[4]),
        )

    def close(self) -> None:
        self.transport.close()

    def __enter__(self) -> "BridgeClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_transport(spec: str) -> Transport:
    """Build a transport from a locator string.

    Accepted forms: ``file:<dir>`` replays a recorded directory,
    ``sidecar:<command line>`` spawns a stdio backend, ``tcp:<host>:<port>``
    connects to a listening one.
    """
    scheme, _, rest = spec.partition(":")
    if not rest:
        raise ConfigurationError(f"backend locator {spec!r} has no target")
    if scheme == "file":
        return FileTransport(rest)
    if scheme == "sidecar":
        return SubprocessTransport(shlex.split(rest))
    if scheme == "tcp":
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigurationError(f"tcp locator {spec!r} is not tcp:<host>:<port>")
        return TcpTransport(host, int(port))
    raise ConfigurationError(f"unknown backend scheme {scheme!r}")


def open_backend(spec: str) -> BridgeClient:
    return BridgeClient(open_transport(spec))
