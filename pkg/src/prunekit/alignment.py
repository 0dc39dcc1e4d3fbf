"""Stage-1 cross-modal filtering.

Every visual token gets an alignment score against the textual token set;
the top-N1 survive. The canonical score is the negated mean L2 distance,
with mean-cosine and a kNN mutual-information estimate as comparison
variants. All accumulation happens in float64 with a fixed inner order, so
results do not depend on how the outer loop is parallelized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import digamma

from .errors import DimMismatchError, DimTooSmallError, EmptyTextError, KeepOutOfRangeError, ZeroNormTokenError
from .tokenset import CrossMetric, Selection, TokenMatrix


@dataclass(frozen=True, eq=False)
class AlignmentScores:
    """One score per visual token, index-aligned with the visual matrix."""

    values: np.ndarray  # float64, length N
    metric: CrossMetric

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64).reshape(-1)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)


def _check_dims(visual: TokenMatrix, textual: TokenMatrix) -> None:
    if visual.dim != textual.dim:
        raise DimMismatchError(
            f"visual dim {visual.dim} != textual dim {textual.dim}"
        )


def score_l2(visual: TokenMatrix, textual: TokenMatrix) -> AlignmentScores:
    """Negated mean L2 distance from each visual token to all textual tokens.

    values[i] = -(1/M) * sum_j ||v_i - t_j||, accumulated in float64 over
    ascending j. Every value is <= 0.
    """
    _check_dims(visual, textual)
    if textual.rows < 1:
        raise EmptyTextError("textual matrix has no rows")
    v = visual.matrix.astype(np.float64)
    t = textual.matrix.astype(np.float64)
    dists = cdist(v, t)  # (N, M), exact per-pair euclidean
    values = -dists.mean(axis=1)
    return AlignmentScores(values=values, metric=CrossMetric.L2)


def score_cosine(visual: TokenMatrix, textual: TokenMatrix) -> AlignmentScores:
    """Mean cosine similarity against the textual set; rejects zero-norm rows."""
    _check_dims(visual, textual)
    if textual.rows < 1:
        raise EmptyTextError("textual matrix has no rows")
    v = visual.matrix.astype(np.float64)
    t = textual.matrix.astype(np.float64)
    vn = np.linalg.norm(v, axis=1)
    tn = np.linalg.norm(t, axis=1)
    for name, norms in (("visual", vn), ("textual", tn)):
        bad = np.flatnonzero(norms == 0.0)
        if bad.size:
            raise ZeroNormTokenError(f"{name} row {int(bad[0])} has zero norm")
    cos = (v / vn[:, None]) @ (t / tn[:, None]).T
    values = cos.mean(axis=1)
    return AlignmentScores(values=values, metric=CrossMetric.COSINE)


def knn_mi_pair(x: np.ndarray, y: np.ndarray, k: int) -> float:
    """Kraskov-style kNN MI estimate for one (visual, textual) token pair.

    The d embedding dimensions are treated as d paired scalar samples, the
    joint space uses the Chebyshev metric, and marginal counts use strict
    inequality. Neighbor-distance ties cannot change the k-th radius, so the
    estimate is deterministic.
    """
    d = x.size
    dx = np.abs(x[:, None] - x[None, :])
    dy = np.abs(y[:, None] - y[None, :])
    dz = np.maximum(dx, dy)
    np.fill_diagonal(dz, np.inf)
    eps = np.partition(dz, k - 1, axis=1)[:, k - 1]
    nx = np.maximum((dx < eps[:, None]).sum(axis=1) - 1, 0)
    ny = np.maximum((dy < eps[:, None]).sum(axis=1) - 1, 0)
    return float(digamma(k) + digamma(d) - np.mean(digamma(nx + 1) + digamma(ny + 1)))


def score_knn_mi(visual: TokenMatrix, textual: TokenMatrix, k: int = 3) -> AlignmentScores:
    """Average kNN MI estimate of each visual token against every textual token."""
    _check_dims(visual, textual)
    if textual.rows < 1:
        raise EmptyTextError("textual matrix has no rows")
    d = visual.dim
    if d <= k:
        raise DimTooSmallError(f"dim {d} must exceed k={k} paired-sample neighbors")
    v = visual.matrix.astype(np.float64)
    t = textual.matrix.astype(np.float64)
    values = np.empty(visual.rows, dtype=np.float64)
    for i in range(visual.rows):
        acc = 0.0
        for j in range(textual.rows):
            acc += knn_mi_pair(v[i], t[j], k)
        values[i] = acc / textual.rows
    return AlignmentScores(values=values, metric=CrossMetric.KNN_MI)


def select_top(scores: AlignmentScores, keep: int) -> Selection:
    """Indices of the `keep` largest scores, ties to the lowest index.

    The returned indices are sorted ascending (stage-1 order is positional)
    and the scores field carries the matching alignment values.
    """
    n = len(scores)
    if not 1 <= keep <= n:
        raise KeepOutOfRangeError(f"keep {keep} outside [1, {n}]")
    order = np.argsort(-scores.values, kind="stable")[:keep]
    chosen = np.sort(order)
    return Selection(
        source_rows=n,
        indices=tuple(int(i) for i in chosen),
        scores=tuple(float(scores.values[i]) for i in chosen),
    )
