"""Minimal TPK v1 writer.

The pruning engine and this exporter share only the file format, so the
byte layout is implemented here independently: magic "TPK1", u32 version 1,
u8 dtype code (0 = f32), u8 modality code (0 visual, 1 textual, 255
unspecified), u64 row count, u64 dim, all little-endian, then rows x dim
little-endian f32 payload in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"TPK1"
VERSION = 1
DTYPE_F32 = 0
MODALITY_VISUAL = 0
MODALITY_TEXTUAL = 1

_HEADER = struct.Struct("<4sIBBQQ")


def write_tpk(rows: np.ndarray, modality: int, path) -> tuple[int, int]:
    """Write a 2-D float array as TPK f32; returns (rows, dim) written."""
    arr = np.ascontiguousarray(rows, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("embeddings contain non-finite values")
    n, d = arr.shape
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_F32, modality, n, d)
    Path(path).write_bytes(header + arr.tobytes())
    return n, d


def read_tpk_header(path) -> tuple[int, int, int]:
    """Read (modality, rows, dim) from a TPK header; used to cross-check
    manifests against what actually landed on disk."""
    blob = Path(path).read_bytes()[: _HEADER.size]
    magic, version, dtype, modality, rows, dim = _HEADER.unpack(blob)
    if magic != MAGIC or version != VERSION or dtype != DTYPE_F32:
        raise ValueError(f"{path} is not a TPK v1 f32 file")
    return modality, rows, dim
