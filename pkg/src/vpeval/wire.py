"""Binary tensor serialization and the framed request/response encoding.

Tensor layout ("VPT1"): 4-byte magic, dtype byte (0x01 = float32 little
endian), ndim byte (max 8), ndim u32-LE dims, then the row-major payload.
Transport frames are u32-LE length-prefixed. Requests carry an op byte, a
u32-prefixed UTF-8 metadata string, and an optional trailing tensor whose
presence is signalled by remaining bytes. OK responses carry a status byte
followed by u32-length-prefixed tensors until the body ends; error responses
carry the status byte and a UTF-8 message.
"""

from __future__ import annotations

import struct
from enum import IntEnum
from typing import BinaryIO, Sequence

import numpy as np

from .errors import FormatError, ProtocolError

MAGIC = b"VPT1"
DTYPE_F32 = 0x01
MAX_NDIM = 8
# Guards against allocating from a corrupt length field.
MAX_FRAME_BYTES = 1 << 30

STATUS_OK = 0x00
STATUS_ERROR = 0x01


class Op(IntEnum):
    EMBED_IMAGE = 0x01
    EMBED_TEXT = 0x02
    ATTN_GRADS = 0x03
    SEGMENT_BOX = 0x04
    MODEL_INFO = 0x05


def encode_tensor(arr: np.ndarray) -> bytes:
    a = np.asarray(arr)
    if a.ndim > 0:
        a = np.ascontiguousarray(a)  # ascontiguousarray would promote rank 0 to 1
    if a.ndim > MAX_NDIM:
        raise FormatError(f"tensor rank {a.ndim} exceeds {MAX_NDIM}", field="ndim")
    for dim in a.shape:
        if dim > 0xFFFFFFFF:
            raise FormatError(f"dimension {dim} exceeds u32", field="dims")
    header = MAGIC + bytes([DTYPE_F32, a.ndim]) + struct.pack(f"<{a.ndim}I", *a.shape)
    return header + a.astype("<f4", copy=False).tobytes("C")


def decode_tensor(data: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one tensor starting at offset; returns (array, next offset)."""
    if data[offset : offset + 4] != MAGIC:
        raise FormatError(
            f"bad magic {data[offset:offset + 4]!r} at offset {offset}", field="magic"
        )
    offset += 4
    if offset >= len(data):
        raise FormatError("truncated before dtype byte", field="dtype")
    dtype = data[offset]
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported dtype byte 0x{dtype:02x}", field="dtype")
    offset += 1
    if offset >= len(data):
        raise FormatError("truncated before ndim byte", field="ndim")
    ndim = data[offset]
    if ndim > MAX_NDIM:
        raise FormatError(f"rank {ndim} exceeds {MAX_NDIM}", field="ndim")
    offset += 1
    dims_end = offset + 4 * ndim
    if dims_end > len(data):
        raise FormatError("truncated inside dims", field="dims")
    shape = struct.unpack_from(f"<{ndim}I", data, offset)
    offset = dims_end
    count = 1
    for dim in shape:
        count *= dim
    payload_end = offset + 4 * count
    if payload_end > len(data):
        raise FormatError(
            f"payload needs {4 * count} bytes, {len(data) - offset} remain", field="payload"
        )
    arr = np.frombuffer(data, dtype="<f4", count=count, offset=offset).reshape(shape)
    return arr.astype(np.float32), payload_end


def read_tensors(data: bytes) -> list[np.ndarray]:
    """Decode tensors concatenated back to back until the buffer ends."""
    out: list[np.ndarray] = []
    offset = 0
    while offset < len(data):
        arr, offset = decode_tensor(data, offset)
        out.append(arr)
    return out


def pack_frame(body: bytes) -> bytes:
    if len(body) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(body)} bytes exceeds limit")
    return struct.pack("<I", len(body)) + body


def read_exact(stream: BinaryIO, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = stream.read(remaining)
        if not chunk:
            raise ProtocolError(f"stream closed with {remaining} of {n} bytes unread")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(stream: BinaryIO) -> bytes:
    (length,) = struct.unpack("<I", read_exact(stream, 4))
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {length} bytes exceeds limit")
    return read_exact(stream, length)


def encode_request(op: Op, metadata: str = "", tensor: np.ndarray | None = None) -> bytes:
    meta = metadata.encode("utf-8")
    body = bytes([op]) + struct.pack("<I", len(meta)) + meta
    if tensor is not None:
        body += encode_tensor(tensor)
    return body


def decode_request(body: bytes) -> tuple[Op, str, np.ndarray | None]:
    if len(body) < 5:
        raise FormatError(f"request body of {len(body)} bytes too short", field="op")
    try:
        op = Op(body[0])
    except ValueError:
        raise FormatError(f"unknown op byte 0x{body[0]:02x}", field="op") from None
    (meta_len,) = struct.unpack_from("<I", body, 1)
    meta_end = 5 + meta_len
    if meta_end > len(body):
        raise FormatError("truncated inside metadata", field="metadata")
    try:
        metadata = body[5:meta_end].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"metadata is not UTF-8: {exc}", field="metadata") from None
    tensor = None
    if meta_end < len(body):
        tensor, end = decode_tensor(body, meta_end)
        if end != len(body):
            raise FormatError(f"{len(body) - end} trailing bytes after tensor", field="payload")
    return op, metadata, tensor


def encode_response_ok(tensors: Sequence[np.ndarray]) -> bytes:
    parts = [bytes([STATUS_OK])]
    for arr in tensors:
        blob = encode_tensor(arr)
        parts.append(struct.pack("<I", len(blob)))
        parts.append(blob)
    return b"".join(parts)


def encode_response_error(message: str) -> bytes:
    return bytes([STATUS_ERROR]) + message.encode("utf-8")


def decode_response(body: bytes) -> list[np.ndarray]:
    """Return the tensors of an OK response; raise ProtocolError carrying the
    server's message for an error response."""
    if not body:
        raise FormatError("empty response body", field="status")
    status = body[0]
    if status == STATUS_ERROR:
        raise ProtocolError(f"backend error: {body[1:].decode('utf-8', 'replace')}")
    if status != STATUS_OK:
        raise FormatError(f"unknown status byte 0x{status:02x}", field="status")
    tensors: list[np.ndarray] = []
    offset = 1
    while offset < len(body):
        if offset + 4 > len(body):
            raise FormatError("truncated tensor length prefix", field="length")
        (length,) = struct.unpack_from("<I", body, offset)
        offset += 4
        end = offset + length
        if end > len(body):
            raise FormatError(f"tensor needs {length} bytes, {len(body) - offset} remain", field="length")
        arr, consumed = decode_tensor(body[offset:end])
        if consumed != length:
            raise FormatError(f"tensor used {consumed} of {length} prefixed bytes", field="length")
        tensors.append(arr)
        offset = end
    return tensors
