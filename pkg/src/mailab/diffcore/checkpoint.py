"""Parameter checkpoint files.

Layout: magic "MAILPARM", u32 format version, then one record per parameter:
u32 name length, utf-8 name, u8 dtype tag (0=f32, 1=f64), u32 rank,
u32 dims, raw little-endian values. Round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .tensor import Tensor

PARAM_MAGIC = b"MAILPARM"
PARAM_VERSION = 1

_DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAG_FOR = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def save_params(path, arrays: dict[str, np.ndarray | Tensor]) -> None:
    path = Path(path)
    chunks = [PARAM_MAGIC, struct.pack("<I", PARAM_VERSION)]
    for name, value in arrays.items():
        data = value.data if isinstance(value, Tensor) else np.asarray(value)
        if data.dtype not in _TAG_FOR:
            raise FormatError(f"unsupported dtype {data.dtype} for parameter {name!r}")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<BI", _TAG_FOR[data.dtype], data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(np.ascontiguousarray(data, dtype=data.dtype.newbyteorder("<")).tobytes())
    path.write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise FormatError(f"truncated checkpoint while reading {what}", self.pos)
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.blob)


def load_params(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    r = _Reader(blob)
    magic = r.take(len(PARAM_MAGIC), "magic")
    if magic != PARAM_MAGIC:
        raise FormatError(
            f"bad checkpoint magic {magic!r}, expected {PARAM_MAGIC!r}", 0
        )
    (version,) = struct.unpack("<I", r.take(4, "version"))
    if version != PARAM_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", r.pos - 4)
    out: dict[str, np.ndarray] = {}
    while not r.exhausted:
        (name_len,) = struct.unpack("<I", r.take(4, "name length"))
        name = r.take(name_len, "name").decode("utf-8")
        tag, rank = struct.unpack("<BI", r.take(5, "dtype/rank"))
        if tag not in _DTYPE_TAGS:
            raise FormatError(f"unknown dtype tag {tag} for {name!r}", r.pos - 5)
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank, "dims"))
        dtype = _DTYPE_TAGS[tag]
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = r.take(count * dtype.itemsize, f"values of {name!r}")
        out[name] = np.frombuffer(raw, dtype=dtype).reshape(dims).copy()
    return out
