"""Quality sweeps and micro-benchmarks of the pruning computation.

Sweeps grid over (synthetic spec, stage-1 ratio) cells, running the default
pipeline, the farthest-point and random controls, and the stage-order
ablations on seeded instances. When the stage-1 pool is small enough, the
exact solver runs too and greedy/random quality is reported as a fraction
of the optimum. Timing runs measure the pruning computation only, with one
excluded warm-up repeat.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .pipeline import PruneConfig, StageOrder, prune, prune_ablation, resolve_n1
from .repmax import build_similarity, exact_solve, greedy_repmax, maxmin_baseline, objective
from .synth import SynthSpec, generate
from .tokenset import Selection

SWEEP_METHODS = (
    "align-repmax",
    "maxmin",
    "random",
    "repmax-align",
    "align-only",
    "repmax-only",
)

SWEEP_EXACT_DEFAULT_CAP = 20_000


@dataclass(frozen=True)
class MethodStats:
    mean: float
    std: float


@dataclass(frozen=True)
class CellSummary:
    objective: dict[str, MethodStats]
    greedy_exact_ratio_mean: Optional[float]
    random_exact_ratio_mean: Optional[float]
    wall_ms_mean: float
    trials: int


@dataclass(frozen=True)
class SweepCell:
    spec: SynthSpec
    ratio: float
    keep_final: int


@dataclass(frozen=True, eq=False)
class SweepResult:
    grid: tuple[tuple[SweepCell, CellSummary], ...]

    def to_json_dict(self) -> dict:
        cells = []
        for cell, summary in self.grid:
            cells.append(
                {
                    "spec": {
                        "n_visual": cell.spec.n_visual,
                        "n_textual": cell.spec.n_textual,
                        "dim": cell.spec.dim,
                        "n_clusters": cell.spec.n_clusters,
                        "cluster_spread": cell.spec.cluster_spread,
                        "outlier_fraction": cell.spec.outlier_fraction,
                        "outlier_scale": cell.spec.outlier_scale,
                        "coupling": cell.spec.coupling,
                        "seed": cell.spec.seed,
                    },
                    "ratio": cell.ratio,
                    "keep_final": cell.keep_final,
                    "objective": {
                        m: {"mean": s.mean, "std": s.std}
                        for m, s in summary.objective.items()
                    },
                    "greedy_exact_ratio_mean": summary.greedy_exact_ratio_mean,
                    "random_exact_ratio_mean": summary.random_exact_ratio_mean,
                    "wall_ms_mean": summary.wall_ms_mean,
                    "trials": summary.trials,
                }
            )
        return {"grid": cells}

    def to_csv(self) -> str:
        out = io.StringIO()
        spec_cols = [
            "n_visual", "n_textual", "dim", "n_clusters", "cluster_spread",
            "outlier_fraction", "outlier_scale", "coupling", "seed",
        ]
        method_cols = []
        for m in SWEEP_METHODS:
            method_cols += [f"{m}_mean", f"{m}_std"]
        header = spec_cols + ["ratio", "keep_final", "trials", "wall_ms_mean"] + method_cols + [
            "greedy_exact_ratio_mean", "random_exact_ratio_mean",
        ]
        out.write(",".join(header) + "\n")
        for cell, summary in self.grid:
            row = [
                cell.spec.n_visual, cell.spec.n_textual, cell.spec.dim,
                cell.spec.n_clusters, cell.spec.cluster_spread,
                cell.spec.outlier_fraction, cell.spec.outlier_scale,
                cell.spec.coupling, cell.spec.seed,
                cell.ratio, cell.keep_final, summary.trials,
                f"{summary.wall_ms_mean:.6g}",
            ]
            for m in SWEEP_METHODS:
                stats = summary.objective[m]
                row += [f"{stats.mean:.9g}", f"{stats.std:.9g}"]
            for r in (summary.greedy_exact_ratio_mean, summary.random_exact_ratio_mean):
                row.append("" if r is None else f"{r:.9g}")
            out.write(",".join(str(v) for v in row) + "\n")
        return out.getvalue()


def run_quality_sweep(
    specs: Sequence[SynthSpec],
    ratios: Sequence[float],
    keep_final: int,
    trials: int,
    exact_cap: int = SWEEP_EXACT_DEFAULT_CAP,
) -> SweepResult:
    """Run every (spec, ratio) cell over `trials` seeded instances.

    The random control samples from the same stage-1 pool the greedy and
    exact selectors see, so quality-vs-optimum ratios stay in (0, 1].
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    for r in ratios:
        if not 0.0 < r <= 1.0:
            raise ValueError(f"ratio {r} outside (0, 1]")
    grid = []
    for base_spec in specs:
        for ratio in ratios:
            cell = SweepCell(spec=base_spec, ratio=ratio, keep_final=keep_final)
            grid.append((cell, _run_cell(cell, trials, exact_cap)))
    return SweepResult(grid=tuple(grid))


def _run_cell(cell: SweepCell, trials: int, exact_cap: int) -> CellSummary:
    objectives: dict[str, list[float]] = {m: [] for m in SWEEP_METHODS}
    greedy_ratios: list[float] = []
    random_ratios: list[float] = []
    walls: list[float] = []
    config = PruneConfig(keep_final=cell.keep_final, stage1_ratio=cell.ratio)

    for trial in range(trials):
        spec = replace(cell.spec, seed=cell.spec.seed + trial)
        visual, textual = generate(spec)

        t0 = time.perf_counter()
        report = prune(visual, textual, config)
        walls.append((time.perf_counter() - t0) * 1e3)
        objectives["align-repmax"].append(_require(report.objective_value))

        sim = build_similarity(visual, report.stage1)
        n1 = len(report.stage1)

        mm = maxmin_baseline(sim, cell.keep_final)
        objectives["maxmin"].append(objective(sim, mm))

        rng = np.random.default_rng(spec.seed + 777)
        rnd_pos = rng.choice(n1, size=cell.keep_final, replace=False)
        rnd = Selection(source_rows=n1, indices=tuple(int(i) for i in rnd_pos))
        rnd_obj = objective(sim, rnd)
        objectives["random"].append(rnd_obj)

        for order in (StageOrder.REPMAX_ALIGN, StageOrder.ALIGN_ONLY, StageOrder.REPMAX_ONLY):
            rep = prune_ablation(visual, textual, config, order)
            objectives[order.value].append(_require(rep.objective_value))

        if math.comb(n1, cell.keep_final) <= exact_cap:
            best = exact_solve(sim, cell.keep_final, cap=exact_cap)
            best_obj = objective(sim, best)
            greedy = greedy_repmax(sim, cell.keep_final)
            if best_obj > 0:
                greedy_ratios.append(objective(sim, greedy) / best_obj)
                random_ratios.append(rnd_obj / best_obj)

    stats = {
        m: MethodStats(mean=float(np.mean(v)), std=float(np.std(v)))
        for m, v in objectives.items()
    }
    return CellSummary(
        objective=stats,
        greedy_exact_ratio_mean=float(np.mean(greedy_ratios)) if greedy_ratios else None,
        random_exact_ratio_mean=float(np.mean(random_ratios)) if random_ratios else None,
        wall_ms_mean=float(np.mean(walls)),
        trials=trials,
    )


def _require(value: Optional[float]) -> float:
    if value is None:
        raise ValueError("sweeps need keep_final >= 2 so the pair objective is defined")
    return value


@dataclass(frozen=True)
class StageTiming:
    mean_ms: float
    min_ms: float
    max_ms: float


@dataclass(frozen=True)
class TimingSummary:
    n: int
    m: int
    dim: int
    keep_final: int
    repeats: int
    stage1: StageTiming
    stage2: StageTiming
    total: StageTiming

    def to_json_dict(self) -> dict:
        def enc(t: StageTiming) -> dict:
            return {"mean_ms": t.mean_ms, "min_ms": t.min_ms, "max_ms": t.max_ms}

        return {
            "n": self.n,
            "m": self.m,
            "dim": self.dim,
            "keep_final": self.keep_final,
            "repeats": self.repeats,
            "stage1": enc(self.stage1),
            "stage2": enc(self.stage2),
            "total": enc(self.total),
        }

    def to_csv(self) -> str:
        lines = ["stage,mean_ms,min_ms,max_ms"]
        for name, t in (("stage1", self.stage1), ("stage2", self.stage2), ("total", self.total)):
            lines.append(f"{name},{t.mean_ms:.6g},{t.min_ms:.6g},{t.max_ms:.6g}")
        return "\n".join(lines) + "\n"


def run_timing(
    n: int,
    m: int,
    d: int,
    keep_final: int,
    repeats: int,
    seed: int = 0,
) -> TimingSummary:
    """Time the full prune on seeded synthetic inputs.

    One warm-up repeat runs first and is excluded from the statistics.
    """
    if repeats < 3:
        raise ValueError(f"repeats must be >= 3, got {repeats}")
    spec = SynthSpec(
        n_visual=n, n_textual=m, dim=d,
        n_clusters=8, cluster_spread=1.0, coupling=0.25, seed=seed,
    )
    visual, textual = generate(spec)
    config = PruneConfig(keep_final=keep_final)

    prune(visual, textual, config)  # warm-up, not recorded
    s1, s2, tot = [], [], []
    for _ in range(repeats):
        report = prune(visual, textual, config)
        s1.append(report.timings.stage1_ms)
        s2.append(report.timings.stage2_ms)
        tot.append(report.timings.total_ms)

    def summarize(xs: list[float]) -> StageTiming:
        return StageTiming(mean_ms=float(np.mean(xs)), min_ms=float(min(xs)), max_ms=float(max(xs)))

    return TimingSummary(
        n=n, m=m, dim=d, keep_final=keep_final, repeats=repeats,
        stage1=summarize(s1), stage2=summarize(s2), total=summarize(tot),
    )
