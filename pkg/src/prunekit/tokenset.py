"""Embedding containers, validation, and token/selection file I/O.

A TokenMatrix is an N x d block of 32-bit float embeddings with a modality
tag. Matrices travel between tools either as "TPK" binary files (bit-exact)
or as a simple CSV (9 significant digits, enough to round-trip f32 exactly).
Selections are JSON.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    DuplicateIndexError,
    InvalidMatrixError,
    MalformedSelectionError,
    NonFiniteEntryError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)

TPK_MAGIC = b"TPK1"
TPK_VERSION = 1
TPK_DTYPE_F32 = 0
_HEADER = struct.Struct("<4sIBBQQ")  # magic, version, dtype, modality, rows, dim
TPK_HEADER_SIZE = _HEADER.size


class Modality(IntEnum):
    """Wire codes for the modality byte of a TPK header."""

    VISUAL = 0
    TEXTUAL = 1
    UNSPECIFIED = 255


class FileFormat(str, Enum):
    BINARY = "binary"
    CSV = "csv"


class CrossMetric(str, Enum):
    """Cross-modal alignment metrics (stage 1)."""

    L2 = "l2"
    COSINE = "cos"
    KNN_MI = "mi-knn"


class IntraMetric(str, Enum):
    """Intra-modal redundancy metrics (stage 2)."""

    COSINE_DISSIM = "cos"
    L2_DIST = "l2"


class TieBreak(str, Enum):
    LOWEST_INDEX = "lowest-index"


@dataclass(frozen=True, eq=False)
class TokenMatrix:
    """Row-major token embeddings.

    `data` is the flat row-major payload; `rows`/`dim` are the declared
    shape. The two can disagree on a hand-built instance, which is exactly
    what validate() reports, so construction never checks consistency.
    """

    modality: Modality
    rows: int
    dim: int
    data: np.ndarray  # 1-D float32, length rows * dim when valid

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32).reshape(-1)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_rows(cls, rows: np.ndarray, modality: Modality = Modality.UNSPECIFIED) -> "TokenMatrix":
        arr = np.asarray(rows, dtype=np.float32)
        if arr.ndim != 2:
            raise InvalidMatrixError(f"expected a 2-D array of rows, got ndim={arr.ndim}")
        return cls(modality=modality, rows=arr.shape[0], dim=arr.shape[1], data=arr.reshape(-1))

    @property
    def matrix(self) -> np.ndarray:
        """2-D read-only view; only meaningful on a valid instance."""
        return self.data.reshape(self.rows, self.dim)


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(matrix: TokenMatrix) -> ValidationResult:
    """Check every declared TokenMatrix invariant; violations are data, not errors."""
    problems: list[str] = []
    if matrix.rows < 1:
        problems.append(f"rows must be >= 1, got {matrix.rows}")
    if matrix.dim < 1:
        problems.append(f"dim must be >= 1, got {matrix.dim}")
    expected = matrix.rows * matrix.dim
    if matrix.data.size != expected:
        problems.append(
            f"length mismatch: data has {matrix.data.size} entries, "
            f"declared rows x dim = {matrix.rows} x {matrix.dim} = {expected}"
        )
    elif matrix.rows >= 1 and matrix.dim >= 1:
        finite = np.isfinite(matrix.data)
        if not finite.all():
            for flat in np.flatnonzero(~finite)[:16]:
                r, c = divmod(int(flat), matrix.dim)
                problems.append(f"non-finite entry at row {r}, column {c}")
    return ValidationResult(tuple(problems))


def ensure_valid(matrix: TokenMatrix) -> None:
    """Raise InvalidMatrixError if validate() reports anything."""
    result = validate(matrix)
    if not result.ok:
        raise InvalidMatrixError("; ".join(result.violations))


@dataclass(frozen=True)
class Selection:
    """Ordered, distinct row indices into a source matrix.

    Order is meaningful (greedy pick order); `scores` is aligned with
    `indices` and its meaning depends on the producing stage.
    """

    source_rows: int
    indices: tuple[int, ...]
    scores: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if self.scores is not None:
            object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        seen = set()
        for i in idx:
            if i in seen:
                raise DuplicateIndexError(f"index {i} appears more than once")
            seen.add(i)
            if not 0 <= i < self.source_rows:
                raise MalformedSelectionError(
                    f"index {i} outside [0, {self.source_rows})"
                )
        if self.scores is not None and len(self.scores) != len(idx):
            raise MalformedSelectionError(
                f"scores length {len(self.scores)} != indices length {len(idx)}"
            )

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class PruneConfig:
    """All pipeline knobs.

    stage1_keep, when set, overrides stage1_ratio. rng_seed feeds only
    synthetic generation and the random baseline.
    """

    keep_final: int
    stage1_ratio: float = 0.8
    stage1_keep: Optional[int] = None
    cross_metric: CrossMetric = CrossMetric.L2
    intra_metric: IntraMetric = IntraMetric.COSINE_DISSIM
    knn_k: int = 3
    tie_break: TieBreak = TieBreak.LOWEST_INDEX
    rng_seed: int = 0

    def __post_init__(self):
        if self.keep_final < 1:
            raise ValueError(f"keep_final must be >= 1, got {self.keep_final}")
        if not 0.0 < self.stage1_ratio <= 1.0:
            raise ValueError(f"stage1_ratio must be in (0, 1], got {self.stage1_ratio}")
        if self.stage1_keep is not None and self.stage1_keep < 1:
            raise ValueError(f"stage1_keep must be >= 1, got {self.stage1_keep}")
        if self.knn_k < 1:
            raise ValueError(f"knn_k must be >= 1, got {self.knn_k}")

    def to_json_dict(self) -> dict:
        return {
            "keep_final": self.keep_final,
            "stage1_ratio": self.stage1_ratio,
            "stage1_keep": self.stage1_keep,
            "cross_metric": self.cross_metric.value,
            "intra_metric": self.intra_metric.value,
            "knn_k": self.knn_k,
            "tie_break": self.tie_break.value,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PruneConfig":
        return cls(
            keep_final=obj["keep_final"],
            stage1_ratio=obj.get("stage1_ratio", 0.8),
            stage1_keep=obj.get("stage1_keep"),
            cross_metric=CrossMetric(obj.get("cross_metric", "l2")),
            intra_metric=IntraMetric(obj.get("intra_metric", "cos")),
            knn_k=obj.get("knn_k", 3),
            tie_break=TieBreak(obj.get("tie_break", "lowest-index")),
            rng_seed=obj.get("rng_seed", 0),
        )


# ---------------------------------------------------------------------------
# Token file I/O
# ---------------------------------------------------------------------------


def write_token_file(matrix: TokenMatrix, path, fmt: FileFormat = FileFormat.BINARY) -> None:
    """Write a validated matrix; binary round-trips bit-exactly, CSV to 9 digits."""
    ensure_valid(matrix)
    path = Path(path)
    if fmt is FileFormat.BINARY:
        header = _HEADER.pack(
            TPK_MAGIC, TPK_VERSION, TPK_DTYPE_F32, int(matrix.modality), matrix.rows, matrix.dim
        )
        payload = matrix.data.astype("<f4", copy=False).tobytes()
        path.write_bytes(header + payload)
    elif fmt is FileFormat.CSV:
        lines = [f"dim={matrix.dim}"]
        m = matrix.matrix
        for r in range(matrix.rows):
            lines.append(",".join(f"{v:.9g}" for v in m[r]))
        path.write_text("\n".join(lines) + "\n")
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown format {fmt}")


def read_token_file(path) -> TokenMatrix:
    """Read a TPK binary or CSV token file; the result always validates Ok."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] == TPK_MAGIC:
        return _read_tpk(blob, path)
    head = blob[:64]
    if head.startswith(b"dim="):
        return _read_csv(blob, path)
    raise BadMagicError(f"{path}: bad magic {blob[:4]!r} at byte offset 0")


def _read_tpk(blob: bytes, path: Path) -> TokenMatrix:
    if len(blob) < TPK_HEADER_SIZE:
        raise TruncatedPayloadError(
            f"{path}: header needs {TPK_HEADER_SIZE} bytes, file has {len(blob)}"
        )
    magic, version, dtype, modality, rows, dim = _HEADER.unpack_from(blob, 0)
    if version != TPK_VERSION:
        raise UnsupportedVersionError(f"{path}: version {version} (byte offset 4), expected {TPK_VERSION}")
    if dtype != TPK_DTYPE_F32:
        raise UnsupportedDtypeError(f"{path}: dtype code {dtype} (byte offset 8), expected {TPK_DTYPE_F32}")
    try:
        mod = Modality(modality)
    except ValueError:
        raise UnsupportedDtypeError(f"{path}: unknown modality code {modality} (byte offset 9)")
    expected = rows * dim * 4
    got = len(blob) - TPK_HEADER_SIZE
    if got != expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {got} bytes from offset {TPK_HEADER_SIZE}, "
            f"header declares {rows} x {dim} f32 = {expected} bytes"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=TPK_HEADER_SIZE)
    finite = np.isfinite(data)
    if not finite.all():
        flat = int(np.flatnonzero(~finite)[0])
        r, c = divmod(flat, dim) if dim else (0, 0)
        raise NonFiniteEntryError(f"{path}: non-finite entry at row {r}, column {c}")
    matrix = TokenMatrix(modality=mod, rows=rows, dim=dim, data=data)
    ensure_valid(matrix)
    return matrix


def _read_csv(blob: bytes, path: Path) -> TokenMatrix:
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BadMagicError(f"{path}: not a text file ({exc})")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        dim = int(lines[0].split("=", 1)[1])
    except (IndexError, ValueError):
        raise BadMagicError(f"{path}: first line must be 'dim=<d>', got {lines[0]!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != dim:
            raise TruncatedPayloadError(
                f"{path}: line {lineno} has {len(parts)} values, expected dim={dim}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise NonFiniteEntryError(f"{path}: line {lineno}: {exc}")
    if not rows:
        raise TruncatedPayloadError(f"{path}: no token rows after the dim header")
    arr = np.asarray(rows, dtype=np.float32)
    if not np.isfinite(arr).all():
        r, c = [int(v) for v in np.argwhere(~np.isfinite(arr))[0]]
        raise NonFiniteEntryError(f"{path}: non-finite entry at row {r}, column {c}")
    matrix = TokenMatrix.from_rows(arr, Modality.UNSPECIFIED)
    ensure_valid(matrix)
    return matrix


# ---------------------------------------------------------------------------
# Selection file I/O
# ---------------------------------------------------------------------------


def write_selection(selection: Selection, path) -> None:
    obj: dict = {"source_rows": selection.source_rows, "indices": list(selection.indices)}
    if selection.scores is not None:
        obj["scores"] = list(selection.scores)
    Path(path).write_text(json.dumps(obj) + "\n")


def read_selection(path) -> Selection:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedSelectionError(f"{path}: {exc}")
    if not isinstance(obj, dict) or "source_rows" not in obj or "indices" not in obj:
        raise MalformedSelectionError(f"{path}: expected keys source_rows and indices")
    scores = obj.get("scores")
    return Selection(
        source_rows=int(obj["source_rows"]),
        indices=tuple(int(i) for i in obj["indices"]),
        scores=tuple(float(s) for s in scores) if scores is not None else None,
    )
