"""Stage-2 intra-modal diversity selection.

The objective is the mean pairwise cosine dissimilarity of the kept set.
Maximizing it exactly is a maximum-dispersion problem (NP-hard), so the
workhorse is a greedy loop: seed at the token with the lowest average
similarity to everything, then repeatedly take the remaining token with the
lowest average similarity to the already-selected set. A running
accumulation vector sigma makes each step O(n).

exact_solve enumerates subsets and is the correctness oracle for small
instances; maxmin_baseline is the farthest-point alternative that chases
the minimum distance instead of the mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, islice
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .errors import KeepOutOfRangeError, TooFewTokensError, TooLargeError, ZeroNormTokenError
from .tokenset import Selection, TokenMatrix

EXACT_SOLVE_DEFAULT_CAP = 2_000_000
_ENUM_CHUNK = 16_384


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Symmetric cosine-similarity matrix with an exact unit diagonal."""

    n: int
    entries: np.ndarray  # (n, n) float64

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.shape != (self.n, self.n):
            raise ValueError(f"entries shape {e.shape} != ({self.n}, {self.n})")
        if not np.array_equal(np.diagonal(e), np.ones(self.n)):
            raise ValueError("diagonal must be exactly 1")
        if np.abs(e - e.T).max(initial=0.0) > 1e-6:
            raise ValueError("entries must be symmetric within 1e-6")
        if e.size and (e.min() < -1.0 - 1e-6 or e.max() > 1.0 + 1e-6):
            raise ValueError("entries must lie in [-1, 1] within 1e-6")
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)


@dataclass(frozen=True)
class GreedyState:
    """Snapshot after one greedy step; sigma[i] accumulates similarity of i
    to every already-selected token."""

    selected: Selection
    remaining: frozenset[int]
    sigma: np.ndarray
    step: int


def cosine_dissim(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(a, b); in [0, 2], zero for parallel, two for antipodal."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNormTokenError("cosine dissimilarity undefined for a zero-norm vector")
    # rounding can push cos marginally outside [-1, 1]; keep the result in [0, 2]
    return float(min(2.0, max(0.0, 1.0 - np.dot(a, b) / (na * nb))))


def build_similarity(tokens: TokenMatrix, subset: Selection) -> SimilarityMatrix:
    """Cosine similarities between the subset rows of `tokens`.

    Each off-diagonal pair is computed once and mirrored; the diagonal is
    set to exactly 1 rather than computed.
    """
    rows = tokens.matrix[list(subset.indices)].astype(np.float64)
    norms = np.linalg.norm(rows, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise ZeroNormTokenError(f"row {subset.indices[int(bad[0])]} has zero norm")
    unit = rows / norms[:, None]
    full = unit @ unit.T
    upper = np.triu(full, k=1)
    entries = upper + upper.T
    np.fill_diagonal(entries, 1.0)
    np.clip(entries, -1.0, 1.0, out=entries)
    return SimilarityMatrix(n=len(subset), entries=entries)


def objective(sim: SimilarityMatrix, chosen: Selection) -> float:
    """Mean pairwise dissimilarity, (2 / k(k-1)) * sum_{i<j} (1 - C_ij)."""
    k = len(chosen)
    if k < 2:
        raise TooFewTokensError(f"objective needs at least 2 chosen tokens, got {k}")
    idx = np.asarray(chosen.indices)
    if idx.max() >= sim.n:
        raise KeepOutOfRangeError(f"chosen index {int(idx.max())} outside similarity matrix of size {sim.n}")
    sub = sim.entries[np.ix_(idx, idx)]
    pair_sim = (float(sub.sum()) - float(np.trace(sub))) / 2.0
    n_pairs = k * (k - 1) / 2.0
    return float((n_pairs - pair_sim) / n_pairs)


def _greedy_min_avg(sim_entries: np.ndarray, keep: int, trace: bool = False):
    """Shared greedy core over a raw square similarity array.

    Returns (pick order, pick scores, states). Ties resolve to the lowest
    index because argmin returns the first minimum.
    """
    n = sim_entries.shape[0]
    row_mean = sim_entries.mean(axis=1)  # includes the diagonal
    seed = int(np.argmin(row_mean))
    order = [seed]
    pick_scores = [float(row_mean[seed])]
    sigma = sim_entries[seed].astype(np.float64, copy=True)
    active = np.ones(n, dtype=bool)
    active[seed] = False
    states: list[GreedyState] = []

    def snapshot(step: int):
        states.append(
            GreedyState(
                selected=Selection(source_rows=n, indices=tuple(order), scores=tuple(pick_scores)),
                remaining=frozenset(int(i) for i in np.flatnonzero(active)),
                sigma=sigma.copy(),
                step=step,
            )
        )

    if trace:
        snapshot(1)
    for t in range(2, keep + 1):
        cand = sigma / (t - 1)
        cand[~active] = np.inf
        s = int(np.argmin(cand))
        order.append(s)
        pick_scores.append(float(cand[s]))
        active[s] = False
        sigma += sim_entries[s]
        if trace:
            snapshot(t)
    return order, pick_scores, states


def greedy_repmax(sim: SimilarityMatrix, keep: int) -> Selection:
    """Greedy mean-dissimilarity maximization; indices in pick order.

    The seed minimizes the row mean of the similarity matrix (diagonal
    included); every later pick minimizes the average similarity to the
    selected set. Scores record each pick's criterion value.
    """
    if not 1 <= keep <= sim.n:
        raise KeepOutOfRangeError(f"keep {keep} outside [1, {sim.n}]")
    order, pick_scores, _ = _greedy_min_avg(sim.entries, keep)
    return Selection(source_rows=sim.n, indices=tuple(order), scores=tuple(pick_scores))


def greedy_trace(sim: SimilarityMatrix, keep: int) -> tuple[Selection, list[GreedyState]]:
    """greedy_repmax plus the per-step state history (for invariant checks)."""
    if not 1 <= keep <= sim.n:
        raise KeepOutOfRangeError(f"keep {keep} outside [1, {sim.n}]")
    order, pick_scores, states = _greedy_min_avg(sim.entries, keep, trace=True)
    return (
        Selection(source_rows=sim.n, indices=tuple(order), scores=tuple(pick_scores)),
        states,
    )


def exact_solve(sim: SimilarityMatrix, keep: int, cap: int = EXACT_SOLVE_DEFAULT_CAP) -> Selection:
    """Brute-force optimum of the mean-dissimilarity objective.

    Enumerates all C(n, keep) subsets in lexicographic order and keeps the
    first strict maximizer, so among maximizers the lexicographically
    smallest index set wins.
    """
    if not 1 <= keep <= sim.n:
        raise KeepOutOfRangeError(f"keep {keep} outside [1, {sim.n}]")
    total = math.comb(sim.n, keep)
    if total > cap:
        raise TooLargeError(f"C({sim.n}, {keep}) = {total} exceeds the enumeration cap {cap}")
    dissim = 1.0 - sim.entries
    pair_pos = [(p, q) for p in range(keep) for q in range(p + 1, keep)]
    best_sum = -np.inf
    best: Optional[tuple[int, ...]] = None
    it = combinations(range(sim.n), keep)
    while True:
        chunk = list(islice(it, _ENUM_CHUNK))
        if not chunk:
            break
        idx = np.asarray(chunk)
        sums = np.zeros(len(chunk), dtype=np.float64)
        for p, q in pair_pos:
            sums += dissim[idx[:, p], idx[:, q]]
        j = int(np.argmax(sums))
        if sums[j] > best_sum:
            best_sum = float(sums[j])
            best = chunk[j]
    assert best is not None
    return Selection(source_rows=sim.n, indices=best, scores=None)


def maxmin_baseline(sim: SimilarityMatrix, keep: int) -> Selection:
    """Farthest-point selection: same seed, then maximize the minimum
    dissimilarity to the selected set. Scores record the seed's row mean
    and each later pick's min-dissimilarity value."""
    if not 1 <= keep <= sim.n:
        raise KeepOutOfRangeError(f"keep {keep} outside [1, {sim.n}]")
    entries = sim.entries
    row_mean = entries.mean(axis=1)
    seed = int(np.argmin(row_mean))
    order = [seed]
    pick_scores = [float(row_mean[seed])]
    max_sim = entries[seed].copy()
    active = np.ones(sim.n, dtype=bool)
    active[seed] = False
    for _ in range(2, keep + 1):
        crit = 1.0 - max_sim  # min dissimilarity to the selected set
        crit[~active] = -np.inf
        s = int(np.argmax(crit))
        order.append(s)
        pick_scores.append(float(crit[s]))
        active[s] = False
        np.maximum(max_sim, entries[s], out=max_sim)
    return Selection(source_rows=sim.n, indices=tuple(order), scores=tuple(pick_scores))


def random_baseline(n: int, keep: int, seed: int) -> Selection:
    """Uniform sample without replacement; deterministic per seed."""
    if not 1 <= keep <= n:
        raise KeepOutOfRangeError(f"keep {keep} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=keep, replace=False)
    return Selection(source_rows=n, indices=tuple(int(i) for i in idx), scores=None)


def l2_dissim_variant(tokens: TokenMatrix, subset: Selection, keep: int) -> Selection:
    """Greedy loop with pairwise L2 distance as the dissimilarity.

    The accumulation vector carries negated distances so the lowest-average-
    similarity rule is unchanged. Zero-norm rows are fine here: no
    normalization happens. Returned indices are positions within `subset`.
    """
    if not 1 <= keep <= len(subset):
        raise KeepOutOfRangeError(f"keep {keep} outside [1, {len(subset)}]")
    rows = tokens.matrix[list(subset.indices)].astype(np.float64)
    neg_dist = -cdist(rows, rows)
    order, pick_scores, _ = _greedy_min_avg(neg_dist, keep)
    return Selection(source_rows=len(subset), indices=tuple(order), scores=tuple(pick_scores))
