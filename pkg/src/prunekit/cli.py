"""Command-line surface.

Subcommands are thin adapters over the library: identical inputs produce
byte-identical core results either way. Exit codes: 0 success, 1 usage
error, 2 data error (bad file, dimension mismatch, zero-norm token, ...).
JSON goes to stdout unless --out names a file.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import bench as bench_mod
from .errors import PruneKitError
from .pipeline import PruneConfig, StageOrder, prune, prune_ablation
from .repmax import build_similarity, exact_solve, greedy_repmax, maxmin_baseline, objective, random_baseline
from .synth import SynthSpec, diagnose_isotropy, generate
from .tokenset import (
    CrossMetric,
    FileFormat,
    IntraMetric,
    Selection,
    read_selection,
    read_token_file,
    write_token_file,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self._exit_with(message))

    def _exit_with(self, message) -> int:
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return 1


def _fmt(parser_kwargs=None):
    return dict(formatter_class=argparse.ArgumentDefaultsHelpFormatter)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="prunekit", description="Visual token pruning engine.", **_fmt())
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def add_common(p):
        p.add_argument("--threads", type=int, default=None,
                       help="BLAS thread cap; 0 = auto (env PRUNEKIT_THREADS as fallback)")
        p.add_argument("--out", type=Path, default=None, help="write result to this file instead of stdout")

    def add_cross(p):
        p.add_argument("--cross-metric", choices=[m.value for m in CrossMetric], default="l2",
                       help="stage-1 alignment metric")
        p.add_argument("--knn-k", type=int, default=3, help="neighbor count for mi-knn")

    def add_stage1(p):
        p.add_argument("--stage1-ratio", type=float, default=0.8, help="stage-1 keep fraction of N")
        p.add_argument("--stage1-keep", type=int, default=None, help="explicit stage-1 keep count (overrides ratio)")

    p = sub.add_parser("score", help="alignment scores of visual tokens against a textual set", **_fmt())
    p.add_argument("--visual", type=Path, required=True, help="visual token file")
    p.add_argument("--text", type=Path, required=True, help="textual token file")
    add_cross(p)
    add_common(p)

    p = sub.add_parser("prune", help="two-stage pruning (alignment filter, then diversity selection)", **_fmt())
    p.add_argument("--visual", type=Path, required=True, help="visual token file")
    p.add_argument("--text", type=Path, required=True, help="textual token file")
    p.add_argument("--keep", type=int, required=True, help="final token count")
    add_stage1(p)
    add_cross(p)
    p.add_argument("--intra-metric", choices=[m.value for m in IntraMetric], default="cos",
                   help="stage-2 dissimilarity metric")
    p.add_argument("--seed", type=int, default=0, help="echoed in the config; not used by this order")
    add_common(p)

    p = sub.add_parser("objective", help="mean pairwise cosine dissimilarity of a token subset", **_fmt())
    p.add_argument("--tokens", type=Path, required=True, help="token file")
    p.add_argument("--selection", type=Path, default=None,
                   help="selection JSON; defaults to all rows")
    add_common(p)

    p = sub.add_parser("exact", help="brute-force optimal subset (small inputs only)", **_fmt())
    p.add_argument("--tokens", type=Path, required=True, help="token file")
    p.add_argument("--keep", type=int, required=True, help="subset size")
    add_common(p)

    p = sub.add_parser("baseline", help="single-stage selectors over one token file", **_fmt())
    p.add_argument("--tokens", type=Path, required=True, help="token file")
    p.add_argument("--keep", type=int, required=True, help="subset size")
    p.add_argument("--method", choices=["repmax", "maxmin", "random"], default="repmax",
                   help="selector")
    p.add_argument("--seed", type=int, default=0, help="seed for the random method")
    add_common(p)

    p = sub.add_parser("ablation", help="pipeline with a swapped or dropped stage", **_fmt())
    p.add_argument("--visual", type=Path, required=True, help="visual token file")
    p.add_argument("--text", type=Path, required=True, help="textual token file")
    p.add_argument("--keep", type=int, required=True, help="final token count")
    p.add_argument("--order", choices=[o.value for o in StageOrder], default="align-repmax",
                   help="stage order")
    add_stage1(p)
    add_cross(p)
    p.add_argument("--intra-metric", choices=[m.value for m in IntraMetric], default="cos",
                   help="stage-2 dissimilarity metric")
    p.add_argument("--seed", type=int, default=0, help="echoed in the config")
    add_common(p)

    p = sub.add_parser("synth", help="generate synthetic visual/textual token files", **_fmt())
    p.add_argument("--n-visual", type=int, required=True, help="visual token count")
    p.add_argument("--n-textual", type=int, required=True, help="textual token count")
    p.add_argument("--dim", type=int, required=True, help="embedding width")
    p.add_argument("--clusters", type=int, default=4, help="background cluster count")
    p.add_argument("--cluster-spread", type=float, default=0.25, help="within-cluster std")
    p.add_argument("--outlier-fraction", type=float, default=0.0, help="fraction of norm-scaled rows")
    p.add_argument("--outlier-scale", type=float, default=1.0, help="norm multiplier for outliers")
    p.add_argument("--coupling", type=float, default=0.0, help="fraction of visual rows near textual rows")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--out-dir", type=Path, required=True, help="directory for visual.tpk and textual.tpk")
    add_common(p)

    p = sub.add_parser("diagnose", help="per-dimension moments of visual-minus-textual differences", **_fmt())
    p.add_argument("--visual", type=Path, required=True, help="visual token file")
    p.add_argument("--text", type=Path, required=True, help="textual token file")
    p.add_argument("--pair-sample", type=int, default=10000, help="sampled (i, j) pairs")
    p.add_argument("--seed", type=int, default=0, help="pair-sampling seed")
    add_common(p)

    p = sub.add_parser("bench", help="time the pruning computation at a given geometry", **_fmt())
    p.add_argument("--n", type=int, required=True, help="visual token count")
    p.add_argument("--m", type=int, default=32, help="textual token count")
    p.add_argument("--dim", type=int, required=True, help="embedding width")
    p.add_argument("--keep", type=int, required=True, help="final token count")
    p.add_argument("--repeats", type=int, default=3, help="timed repeats after one warm-up")
    p.add_argument("--seed", type=int, default=0, help="synthetic data seed")
    p.add_argument("--format", choices=["json", "csv"], default="json", help="output format")
    add_common(p)

    p = sub.add_parser("sweep", help="quality sweep over stage-1 ratios on synthetic data", **_fmt())
    p.add_argument("--n-visual", type=int, required=True, help="visual token count")
    p.add_argument("--n-textual", type=int, required=True, help="textual token count")
    p.add_argument("--dim", type=int, required=True, help="embedding width")
    p.add_argument("--clusters", type=int, default=4, help="background cluster count")
    p.add_argument("--cluster-spread", type=float, default=0.25, help="within-cluster std")
    p.add_argument("--coupling", type=float, default=0.5, help="fraction of visual rows near textual rows")
    p.add_argument("--ratios", type=str, default="0.9,0.8,0.75,0.7",
                   help="comma-separated stage-1 ratios")
    p.add_argument("--keep", type=int, required=True, help="final token count")
    p.add_argument("--trials", type=int, default=20, help="seeded instances per cell")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--format", choices=["json", "csv"], default="json", help="output format")
    add_common(p)

    return parser


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("PRUNEKIT_THREADS", "").strip()
    if env:
        try:
            return int(env)
        except ValueError:
            raise PruneKitError(f"PRUNEKIT_THREADS={env!r} is not an integer")
    return 0


def _thread_guard(threads: int):
    if threads > 0:
        return threadpool_limits(limits=threads)
    return contextlib.nullcontext()


def _emit(args, payload) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2) + "\n"
    if args.out is not None:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _config_from(args) -> PruneConfig:
    return PruneConfig(
        keep_final=args.keep,
        stage1_ratio=args.stage1_ratio,
        stage1_keep=args.stage1_keep,
        cross_metric=CrossMetric(args.cross_metric),
        intra_metric=IntraMetric(args.intra_metric),
        knn_k=args.knn_k,
        rng_seed=args.seed,
    )


def _selection_json(sel: Selection) -> dict:
    obj = {"source_rows": sel.source_rows, "indices": list(sel.indices)}
    if sel.scores is not None:
        obj["scores"] = list(sel.scores)
    return obj


def _all_rows(n: int) -> Selection:
    return Selection(source_rows=n, indices=tuple(range(n)))


def cmd_score(args):
    visual = read_token_file(args.visual)
    textual = read_token_file(args.text)
    config = PruneConfig(keep_final=1, cross_metric=CrossMetric(args.cross_metric), knn_k=args.knn_k)
    from .pipeline import cross_scores

    scores = cross_scores(visual, textual, config)
    return {"metric": scores.metric.value, "values": [float(v) for v in scores.values]}


def cmd_prune(args):
    visual = read_token_file(args.visual)
    textual = read_token_file(args.text)
    report = prune(visual, textual, _config_from(args))
    return report.to_json_dict()


def cmd_objective(args):
    tokens = read_token_file(args.tokens)
    sel = read_selection(args.selection) if args.selection else _all_rows(tokens.rows)
    sim = build_similarity(tokens, sel)
    value = objective(sim, _all_rows(len(sel)))
    return {"objective": value, "count": len(sel)}


def cmd_exact(args):
    tokens = read_token_file(args.tokens)
    sim = build_similarity(tokens, _all_rows(tokens.rows))
    best = exact_solve(sim, args.keep)
    return _selection_json(best)


def cmd_baseline(args):
    tokens = read_token_file(args.tokens)
    if args.method == "random":
        sel = random_baseline(tokens.rows, args.keep, args.seed)
    else:
        sim = build_similarity(tokens, _all_rows(tokens.rows))
        sel = greedy_repmax(sim, args.keep) if args.method == "repmax" else maxmin_baseline(sim, args.keep)
    return _selection_json(sel)


def cmd_ablation(args):
    visual = read_token_file(args.visual)
    textual = read_token_file(args.text)
    report = prune_ablation(visual, textual, _config_from(args), StageOrder(args.order))
    return report.to_json_dict()


def cmd_synth(args):
    spec = SynthSpec(
        n_visual=args.n_visual,
        n_textual=args.n_textual,
        dim=args.dim,
        n_clusters=args.clusters,
        cluster_spread=args.cluster_spread,
        outlier_fraction=args.outlier_fraction,
        outlier_scale=args.outlier_scale,
        coupling=args.coupling,
        seed=args.seed,
    )
    visual, textual = generate(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vpath = out_dir / "visual.tpk"
    tpath = out_dir / "textual.tpk"
    write_token_file(visual, vpath, FileFormat.BINARY)
    write_token_file(textual, tpath, FileFormat.BINARY)
    return {
        "visual": str(vpath),
        "textual": str(tpath),
        "n_visual": visual.rows,
        "n_textual": textual.rows,
        "dim": visual.dim,
        "seed": args.seed,
    }


def cmd_diagnose(args):
    visual = read_token_file(args.visual)
    textual = read_token_file(args.text)
    report = diagnose_isotropy(visual, textual, pair_sample=args.pair_sample, seed=args.seed)
    return report.to_json_dict()


def cmd_bench(args):
    summary = bench_mod.run_timing(args.n, args.m, args.dim, args.keep, args.repeats, seed=args.seed)
    return summary.to_csv() if args.format == "csv" else summary.to_json_dict()


def cmd_sweep(args):
    spec = SynthSpec(
        n_visual=args.n_visual,
        n_textual=args.n_textual,
        dim=args.dim,
        n_clusters=args.clusters,
        cluster_spread=args.cluster_spread,
        coupling=args.coupling,
        seed=args.seed,
    )
    try:
        ratios = [float(r) for r in args.ratios.split(",") if r.strip()]
    except ValueError:
        raise PruneKitError(f"--ratios must be comma-separated numbers, got {args.ratios!r}")
    result = bench_mod.run_quality_sweep([spec], ratios, args.keep, args.trials)
    return result.to_csv() if args.format == "csv" else result.to_json_dict()


_COMMANDS = {
    "score": cmd_score,
    "prune": cmd_prune,
    "objective": cmd_objective,
    "exact": cmd_exact,
    "baseline": cmd_baseline,
    "ablation": cmd_ablation,
    "synth": cmd_synth,
    "diagnose": cmd_diagnose,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        threads = _resolve_threads(args)
        with _thread_guard(threads):
            payload = _COMMANDS[args.subcommand](args)
        _emit(args, payload)
    except PruneKitError as exc:
        print(f"prunekit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"prunekit: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"prunekit: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
