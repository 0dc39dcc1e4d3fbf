"""Two-stage pruning pipeline and its ablation orders.

Default order: alignment filter down to N1 visual tokens, then greedy
diversity selection down to N2. All reported indices refer to rows of the
original visual matrix; stage 2 runs on the compacted stage-1 submatrix and
is mapped back.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .alignment import AlignmentScores, score_cosine, score_knn_mi, score_l2, select_top
from .errors import DimMismatchError, KeepOutOfRangeError
from .repmax import build_similarity, greedy_repmax, l2_dissim_variant, objective
from .tokenset import (
    CrossMetric,
    IntraMetric,
    PruneConfig,
    Selection,
    TokenMatrix,
    ensure_valid,
)


class StageOrder(str, Enum):
    ALIGN_REPMAX = "align-repmax"
    REPMAX_ALIGN = "repmax-align"
    ALIGN_ONLY = "align-only"
    REPMAX_ONLY = "repmax-only"


@dataclass(frozen=True)
class Timings:
    stage1_ms: float
    stage2_ms: float
    total_ms: float

    def to_json_dict(self) -> dict:
        return {"stage1": self.stage1_ms, "stage2": self.stage2_ms, "total": self.total_ms}


@dataclass(frozen=True, eq=False)
class PruneReport:
    """Full pipeline output. stage2 indices are in pick order; both stages
    speak in original visual-row indices."""

    stage1: Selection
    stage2: Selection
    alignment_scores: AlignmentScores
    objective_value: Optional[float]
    timings: Timings
    config: PruneConfig

    def to_json_dict(self) -> dict:
        return {
            "stage1_indices": list(self.stage1.indices),
            "stage2_indices": list(self.stage2.indices),
            "alignment_scores": [float(v) for v in self.alignment_scores.values],
            "objective": self.objective_value,
            "timings_ms": self.timings.to_json_dict(),
            "config": self.config.to_json_dict(),
        }


def resolve_n1(n: int, config: PruneConfig) -> int:
    """Stage-1 keep count: explicit override, else round-half-away-from-zero
    of ratio * n, clamped into [keep_final, n]."""
    if n < 1:
        raise KeepOutOfRangeError(f"n must be >= 1, got {n}")
    if config.stage1_keep is not None:
        n1 = config.stage1_keep
    else:
        n1 = int(math.floor(config.stage1_ratio * n + 0.5))
    return max(config.keep_final, min(n1, n))


def cross_scores(visual: TokenMatrix, textual: TokenMatrix, config: PruneConfig) -> AlignmentScores:
    if config.cross_metric is CrossMetric.L2:
        return score_l2(visual, textual)
    if config.cross_metric is CrossMetric.COSINE:
        return score_cosine(visual, textual)
    return score_knn_mi(visual, textual, k=config.knn_k)


def _check_inputs(visual: TokenMatrix, textual: TokenMatrix, config: PruneConfig) -> None:
    ensure_valid(visual)
    ensure_valid(textual)
    if visual.dim != textual.dim:
        raise DimMismatchError(f"visual dim {visual.dim} != textual dim {textual.dim}")
    if config.keep_final > visual.rows:
        raise KeepOutOfRangeError(
            f"keep_final {config.keep_final} exceeds visual rows {visual.rows}"
        )


def _intra_select(visual: TokenMatrix, pool: Selection, keep: int, config: PruneConfig) -> Selection:
    """Run the configured stage-2 selector over `pool`; returns original indices
    in pick order."""
    if config.intra_metric is IntraMetric.COSINE_DISSIM:
        sim = build_similarity(visual, pool)
        picks = greedy_repmax(sim, keep)
    else:
        picks = l2_dissim_variant(visual, pool, keep)
    return Selection(
        source_rows=visual.rows,
        indices=tuple(pool.indices[p] for p in picks.indices),
        scores=picks.scores,
    )


def _final_objective(visual: TokenMatrix, final: Selection) -> Optional[float]:
    """Mean pairwise cosine dissimilarity of the final set; None for a
    single kept token, where the pair mean is undefined."""
    if len(final) < 2:
        return None
    sim = build_similarity(visual, final)
    all_of_it = Selection(source_rows=len(final), indices=tuple(range(len(final))))
    return objective(sim, all_of_it)


def prune(visual: TokenMatrix, textual: TokenMatrix, config: PruneConfig) -> PruneReport:
    """Alignment filter to N1, then greedy diversity selection to keep_final."""
    _check_inputs(visual, textual, config)
    t_start = time.perf_counter()
    scores = cross_scores(visual, textual, config)
    n1 = resolve_n1(visual.rows, config)
    stage1 = select_top(scores, n1)
    t_mid = time.perf_counter()
    stage2 = _intra_select(visual, stage1, config.keep_final, config)
    obj = _final_objective(visual, stage2)
    t_end = time.perf_counter()
    return PruneReport(
        stage1=stage1,
        stage2=stage2,
        alignment_scores=scores,
        objective_value=obj,
        timings=Timings(
            stage1_ms=(t_mid - t_start) * 1e3,
            stage2_ms=(t_end - t_mid) * 1e3,
            total_ms=(t_end - t_start) * 1e3,
        ),
        config=config,
    )


def prune_ablation(
    visual: TokenMatrix,
    textual: TokenMatrix,
    config: PruneConfig,
    order: StageOrder,
) -> PruneReport:
    """Pipeline variants that swap or drop a stage.

    repmax-align runs the diversity selector first (to the same N1 the
    default order would use), then keeps the keep_final best-aligned
    survivors. The single-stage orders report the one selection as both
    stage1 and stage2.
    """
    if order is StageOrder.ALIGN_REPMAX:
        return prune(visual, textual, config)
    _check_inputs(visual, textual, config)
    t_start = time.perf_counter()
    scores = cross_scores(visual, textual, config)
    all_rows = Selection(source_rows=visual.rows, indices=tuple(range(visual.rows)))

    if order is StageOrder.REPMAX_ALIGN:
        n1 = resolve_n1(visual.rows, config)
        t_mid = time.perf_counter()
        stage1 = _intra_select(visual, all_rows, n1, config)
        survivors = sorted(stage1.indices)
        restricted = AlignmentScores(
            values=scores.values[survivors], metric=scores.metric
        )
        picked = select_top(restricted, config.keep_final)
        stage2 = Selection(
            source_rows=visual.rows,
            indices=tuple(survivors[p] for p in picked.indices),
            scores=picked.scores,
        )
        t_end = time.perf_counter()
        stage1_ms = (t_end - t_mid) * 1e3  # diversity stage came first
        stage2_ms = (t_mid - t_start) * 1e3
    elif order is StageOrder.ALIGN_ONLY:
        picked = select_top(scores, config.keep_final)
        stage1 = stage2 = Selection(
            source_rows=visual.rows, indices=picked.indices, scores=picked.scores
        )
        t_end = time.perf_counter()
        stage1_ms = (t_end - t_start) * 1e3
        stage2_ms = 0.0
    elif order is StageOrder.REPMAX_ONLY:
        t_mid = time.perf_counter()
        stage1 = stage2 = _intra_select(visual, all_rows, config.keep_final, config)
        t_end = time.perf_counter()
        stage1_ms = (t_mid - t_start) * 1e3
        stage2_ms = (t_end - t_mid) * 1e3
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown order {order}")

    obj = _final_objective(visual, stage2)
    total_ms = (time.perf_counter() - t_start) * 1e3
    return PruneReport(
        stage1=stage1,
        stage2=stage2,
        alignment_scores=scores,
        objective_value=obj,
        timings=Timings(stage1_ms=stage1_ms, stage2_ms=stage2_ms, total_ms=total_ms),
        config=config,
    )
