"""Synthetic embedding generation with controlled structure.

Textual tokens are cluster centers plus noise; a configurable fraction of
visual tokens is sampled near random textual tokens (cross-modal coupling),
the rest come from background clusters, and a fraction gets norm-scaled to
act as L2 outliers. Generation is a pure function of its SynthSpec: the
PRNG is numpy's PCG64 seeded from SynthSpec.seed, so equal specs yield
bit-identical matrices.

diagnose_isotropy fits per-dimension moments of sampled visual-minus-textual
differences, the empirical check behind modeling that conditional as an
isotropic Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError
from .tokenset import Modality, TokenMatrix


@dataclass(frozen=True)
class SynthSpec:
    n_visual: int
    n_textual: int
    dim: int
    n_clusters: int = 4
    cluster_spread: float = 0.25
    outlier_fraction: float = 0.0
    outlier_scale: float = 1.0
    coupling: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n_visual, self.n_textual, self.dim, self.n_clusters) < 1:
            raise ValueError("all counts must be >= 1")
        if self.cluster_spread < 0:
            raise ValueError("cluster_spread must be >= 0")
        if not 0.0 <= self.outlier_fraction <= 1.0:
            raise ValueError("outlier_fraction must be in [0, 1]")
        if self.outlier_scale < 1.0:
            raise ValueError("outlier_scale must be >= 1")
        if not 0.0 <= self.coupling <= 1.0:
            raise ValueError("coupling must be in [0, 1]")


@dataclass(frozen=True, eq=False)
class IsotropyReport:
    per_dim_mean: np.ndarray
    per_dim_std: np.ndarray
    grand_mean: float
    grand_std: float
    std_dispersion: float

    def to_json_dict(self) -> dict:
        return {
            "per_dim_mean": [float(v) for v in self.per_dim_mean],
            "per_dim_std": [float(v) for v in self.per_dim_std],
            "grand_mean": self.grand_mean,
            "grand_std": self.grand_std,
            "std_dispersion": self.std_dispersion,
        }


def generate(spec: SynthSpec) -> tuple[TokenMatrix, TokenMatrix]:
    """Build (visual, textual) matrices per the SynthSpec, deterministically."""
    rng = np.random.default_rng(spec.seed)
    centers = rng.standard_normal((spec.n_clusters, spec.dim))

    t_assign = rng.integers(0, spec.n_clusters, size=spec.n_textual)
    textual = centers[t_assign] + spec.cluster_spread * rng.standard_normal(
        (spec.n_textual, spec.dim)
    )

    v_assign = rng.integers(0, spec.n_clusters, size=spec.n_visual)
    visual = centers[v_assign] + spec.cluster_spread * rng.standard_normal(
        (spec.n_visual, spec.dim)
    )

    n_coupled = int(round(spec.coupling * spec.n_visual))
    if n_coupled:
        coupled_rows = rng.choice(spec.n_visual, size=n_coupled, replace=False)
        anchors = rng.integers(0, spec.n_textual, size=n_coupled)
        visual[coupled_rows] = textual[anchors] + spec.cluster_spread * rng.standard_normal(
            (n_coupled, spec.dim)
        )

    n_outliers = int(round(spec.outlier_fraction * spec.n_visual))
    if n_outliers:
        outlier_rows = rng.choice(spec.n_visual, size=n_outliers, replace=False)
        visual[outlier_rows] *= spec.outlier_scale

    return (
        TokenMatrix.from_rows(visual.astype(np.float32), Modality.VISUAL),
        TokenMatrix.from_rows(textual.astype(np.float32), Modality.TEXTUAL),
    )


def diagnose_isotropy(
    visual: TokenMatrix,
    textual: TokenMatrix,
    pair_sample: int = 10_000,
    seed: int = 0,
) -> IsotropyReport:
    """Per-dimension moments of visual-minus-textual differences over
    uniformly sampled token pairs. Grand statistics are the means of the
    per-dimension ones; std_dispersion is the spread of the per-dimension
    stds (near zero for isotropic input)."""
    if visual.dim != textual.dim:
        raise DimMismatchError(f"visual dim {visual.dim} != textual dim {textual.dim}")
    if pair_sample < 2:
        raise ValueError(f"pair_sample must be >= 2, got {pair_sample}")
    rng = np.random.default_rng(seed)
    i = rng.integers(0, visual.rows, size=pair_sample)
    j = rng.integers(0, textual.rows, size=pair_sample)
    diffs = visual.matrix[i].astype(np.float64) - textual.matrix[j].astype(np.float64)
    per_dim_mean = diffs.mean(axis=0)
    per_dim_std = diffs.std(axis=0)
    return IsotropyReport(
        per_dim_mean=per_dim_mean,
        per_dim_std=per_dim_std,
        grand_mean=float(per_dim_mean.mean()),
        grand_std=float(per_dim_std.mean()),
        std_dispersion=float(per_dim_std.std()),
    )
