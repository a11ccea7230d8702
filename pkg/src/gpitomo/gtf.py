"""GTF: the bit-exact tensor interchange format.

Layout: a 64-byte header (magic ``GITF``, version u32 = 1, dtype u32 with
1 = float32, rank u32, then 48 reserved zero bytes), followed by ``rank``
little-endian u64 dims, followed by the row-major little-endian float32
payload (last dim fastest). Optional metadata travels in a JSON sidecar at
``<path>.json``; the binary stream itself never changes.

Axis orders by convention: volumes (z, y, x); projection sets (view, v, u).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

__all__ = ["GtfError", "BadMagicError", "VersionError", "TruncatedError",
           "DimOverflowError", "write_gtf", "read_gtf"]

MAGIC = b"GITF"
VERSION = 1
DTYPE_FLOAT32 = 1
HEADER_SIZE = 64
MAX_ELEMENTS = 2 ** 40  # sanity cap; anything larger is a corrupt header


class GtfError(ValueError):
    """Base class for GTF format errors."""


class BadMagicError(GtfError):
    pass


class VersionError(GtfError):
    pass


class TruncatedError(GtfError):
    pass


class DimOverflowError(GtfError):
    pass


def _sidecar(path):
    return Path(str(path) + ".json")


def write_gtf(path, tensor, metadata=None):
    """Write a rank 2-4 tensor as float32 GTF; metadata goes to a sidecar."""
    arr = np.ascontiguousarray(tensor, dtype="<f4")
    if arr.ndim not in (2, 3, 4):
        raise GtfError(f"GTF stores rank 2-4 tensors, got rank {arr.ndim}")
    path = Path(path)
    header = MAGIC + struct.pack("<III", VERSION, DTYPE_FLOAT32, arr.ndim)
    header += b"\x00" * (HEADER_SIZE - len(header))
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    with open(path, "wb") as f:
        f.write(header)
        f.write(dims)
        f.write(arr.tobytes())
    if metadata is not None:
        _sidecar(path).write_text(
            json.dumps(metadata, indent=2, sort_keys=True) + "\n")


def read_gtf(path):
    """Read a GTF file; returns (array, metadata-or-None)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER_SIZE:
        raise TruncatedError(f"{path}: file shorter than the 64-byte header")
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, dtype, rank = struct.unpack_from("<III", raw, 4)
    if version != VERSION:
        raise VersionError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_FLOAT32:
        raise GtfError(f"{path}: unsupported dtype code {dtype}")
    if rank not in (2, 3, 4):
        raise GtfError(f"{path}: unsupported rank {rank}")
    if any(raw[16:HEADER_SIZE]):
        raise GtfError(f"{path}: reserved header bytes are not zero")
    dims_end = HEADER_SIZE + 8 * rank
    if len(raw) < dims_end:
        raise TruncatedError(f"{path}: truncated dims block")
    dims = struct.unpack_from(f"<{rank}Q", raw, HEADER_SIZE)
    n = 1
    for d in dims:
        n *= d
    if n > MAX_ELEMENTS:
        raise DimOverflowError(f"{path}: dims {dims} overflow the element cap")
    expected = dims_end + 4 * n
    if len(raw) < expected:
        raise TruncatedError(
            f"{path}: payload truncated ({len(raw)} bytes, expected {expected})")
    if len(raw) > expected:
        raise GtfError(f"{path}: {len(raw) - expected} trailing bytes")
    arr = np.frombuffer(raw, dtype="<f4", count=n, offset=dims_end).reshape(dims)
    meta = None
    sc = _sidecar(path)
    if sc.exists():
        meta = json.loads(sc.read_text())
    return arr.copy(), meta
