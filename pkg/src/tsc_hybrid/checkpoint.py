"""Flat binary parameter checkpoints.

Layout (all integers little-endian uint32)::

    b"TSC1" | version | count
    count x ( name_len | name (utf-8) | rank | dims[rank] | float32 data )
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .tensor import Tensor

__all__ = ["CheckpointError", "FORMAT_VERSION", "MAGIC", "load_checkpoint", "save_checkpoint"]

MAGIC = b"TSC1"
FORMAT_VERSION = 1
_U32 = struct.Struct("<I")


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: Mapping[str, Tensor | np.ndarray]) -> None:
    chunks = [MAGIC, _U32.pack(FORMAT_VERSION), _U32.pack(len(params))]
    for name, value in params.items():
        arr = value.data if isinstance(value, Tensor) else np.asarray(value)
        encoded = name.encode("utf-8")
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U32.pack(arr.ndim))
        chunks.extend(_U32.pack(n) for n in arr.shape)
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read a checkpoint into name -> float32 array, preserving record order."""
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {buf[:4]!r}")
    pos = 4

    def u32():
        nonlocal pos
        if pos + 4 > len(buf):
            raise CheckpointError(f"{path}: truncated at byte {pos}")
        (n,) = _U32.unpack_from(buf, pos)
        pos += 4
        return n

    version = u32()
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    out: dict[str, np.ndarray] = {}
    for _ in range(u32()):
        name_len = u32()
        name = buf[pos : pos + name_len].decode("utf-8")
        pos += name_len
        dims = tuple(u32() for _ in range(u32()))
        nbytes = 4 * int(np.prod(dims, dtype=np.int64))
        if pos + nbytes > len(buf):
            raise CheckpointError(f"{path}: truncated record {name!r}")
        out[name] = np.frombuffer(buf, dtype="<f4", count=nbytes // 4, offset=pos).reshape(dims).copy()
        pos += nbytes
    if pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - pos} trailing bytes")
    return out
