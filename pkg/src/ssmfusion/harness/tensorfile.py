"""Bit-exact binary tensor formats.

Single tensor ("MSFT"):
    magic   4 bytes  b"MSFT"
    version u16      1
    dtype   u8       1 = float32, 2 = float64
    ndim    u8       1..8
    dims    ndim*u32
    payload little-endian row-major scalars

Named container ("MSFC"): checkpoint-style, one entry per named tensor.
    magic   4 bytes  b"MSFC"
    version u16      1
    meta    u32 length + UTF-8 JSON (configs, bookkeeping)
    count   u32
    entries: name u16 length + UTF-8 bytes, then an embedded MSFT record

Label map ("MSFL"): u16 class ids on an (H, W) grid, 0 = unlabeled.
    magic, version u16 = 1, H u32, W u32, payload u16 little-endian

All integers little-endian. Round-trips are bitwise exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC_TENSOR = b"MSFT"
MAGIC_CONTAINER = b"MSFC"
MAGIC_LABELS = b"MSFL"
VERSION = 1

_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_FOR = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


class FormatError(ValueError):
    """Malformed or unsupported tensor file content."""


def tensor_bytes(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype not in _CODE_FOR:
        raise FormatError(f"unsupported dtype {arr.dtype}; need float32 or float64")
    if arr.ndim < 1 or arr.ndim > 8:
        raise FormatError(f"rank must be 1..8, got {arr.ndim}")
    if arr.size < 1:
        raise FormatError("zero-length tensors are not representable")
    header = MAGIC_TENSOR + struct.pack(
        "<HBB", VERSION, _CODE_FOR[arr.dtype], arr.ndim
    )
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes()
    return header + payload


def tensor_from(buf: bytes, offset: int = 0):
    """Decode one MSFT record; returns (array, next_offset)."""
    if buf[offset : offset + 4] != MAGIC_TENSOR:
        raise FormatError("bad magic; not a tensor record")
    version, code, ndim = struct.unpack_from("<HBB", buf, offset + 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if code not in _DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code}")
    if not 1 <= ndim <= 8:
        raise FormatError(f"rank must be 1..8, got {ndim}")
    pos = offset + 8
    dims = struct.unpack_from(f"<{ndim}I", buf, pos)
    pos += 4 * ndim
    count = 1
    for d in dims:
        if d < 1:
            raise FormatError(f"dimension {d} < 1")
        count *= d
    dtype = _DTYPE_CODES[code]
    nbytes = count * dtype.itemsize
    if len(buf) - pos < nbytes:
        raise FormatError("truncated payload")
    arr = np.frombuffer(buf, dtype=dtype, count=count, offset=pos).reshape(dims)
    return arr.astype(dtype.newbyteorder("=")), pos + nbytes


def write_tensor(path, arr: np.ndarray):
    with open(path, "wb") as f:
        f.write(tensor_bytes(arr))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    arr, end = tensor_from(buf)
    if end != len(buf):
        raise FormatError(f"{end} bytes consumed but file has {len(buf)}")
    return arr


def write_container(path, tensors: dict, meta: dict | None = None):
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC_CONTAINER + struct.pack("<H", VERSION))
        f.write(struct.pack("<I", len(meta_bytes)) + meta_bytes)
        f.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)) + nb)
            f.write(tensor_bytes(np.asarray(tensors[name])))


def read_container(path):
    """Returns (meta dict, {name: array})."""
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != MAGIC_CONTAINER:
        raise FormatError("bad magic; not a tensor container")
    (version,) = struct.unpack_from("<H", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    (meta_len,) = struct.unpack_from("<I", buf, 6)
    pos = 10
    meta = json.loads(buf[pos : pos + meta_len].decode("utf-8")) if meta_len else {}
    pos += meta_len
    (count,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos : pos + name_len].decode("utf-8")
        pos += name_len
        tensors[name], pos = tensor_from(buf, pos)
    if pos != len(buf):
        raise FormatError(f"{pos} bytes consumed but file has {len(buf)}")
    return meta, tensors


def write_labels(path, labels: np.ndarray):
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise FormatError(f"label map must be 2-D, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() > np.iinfo(np.uint16).max:
        raise FormatError("label ids must fit in u16")
    h, w = labels.shape
    with open(path, "wb") as f:
        f.write(MAGIC_LABELS + struct.pack("<HII", VERSION, h, w))
        f.write(labels.astype("<u2").tobytes())


def read_labels(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != MAGIC_LABELS:
        raise FormatError("bad magic; not a label map")
    version, h, w = struct.unpack_from("<HII", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported label map version {version}")
    expected = 14 + 2 * h * w
    if len(buf) != expected:
        raise FormatError(f"label payload length {len(buf)} != {expected}")
    return np.frombuffer(buf, dtype="<u2", offset=14).reshape(h, w).astype(np.uint16)
