"""Sweep and timing harness contracts."""

import numpy as np
import pytest

from prunekit import SynthSpec
from prunekit.bench import run_quality_sweep, run_timing


class TestQualitySweep:
    def test_full_retention_all_methods_equal(self):
        spec = SynthSpec(n_visual=10, n_textual=3, dim=6, cluster_spread=0.5, coupling=0.4, seed=1)
        result = run_quality_sweep([spec], ratios=[1.0], keep_final=10, trials=3)
        (_, summary), = result.grid
        means = {m: s.mean for m, s in summary.objective.items()}
        reference = means["align-repmax"]
        for method, mean in means.items():
            assert mean == pytest.approx(reference, abs=1e-9), method
        assert summary.greedy_exact_ratio_mean == pytest.approx(1.0, abs=1e-9)
        assert summary.random_exact_ratio_mean == pytest.approx(1.0, abs=1e-9)

    def test_exact_ratios_recorded_and_ordered(self):
        spec = SynthSpec(n_visual=12, n_textual=4, dim=8, cluster_spread=0.6, coupling=0.5, seed=7)
        result = run_quality_sweep([spec], ratios=[0.9], keep_final=6, trials=200)
        (_, summary), = result.grid
        assert summary.greedy_exact_ratio_mean is not None
        assert 0.0 < summary.greedy_exact_ratio_mean <= 1.0 + 1e-9
        assert summary.greedy_exact_ratio_mean >= summary.random_exact_ratio_mean
        # both pipeline orders sit above the random control on average
        means = {m: s.mean for m, s in summary.objective.items()}
        assert means["align-repmax"] >= means["random"]
        assert means["repmax-only"] >= means["random"]

    def test_duplicate_cells_identical(self):
        spec = SynthSpec(n_visual=9, n_textual=3, dim=5, coupling=0.3, seed=2)
        result = run_quality_sweep([spec, spec], ratios=[0.8], keep_final=4, trials=4)
        (_, a), (_, b) = result.grid
        assert a.objective == b.objective
        assert a.greedy_exact_ratio_mean == b.greedy_exact_ratio_mean

    def test_rejects_bad_inputs(self):
        spec = SynthSpec(n_visual=5, n_textual=2, dim=4)
        with pytest.raises(ValueError):
            run_quality_sweep([spec], ratios=[0.5], keep_final=3, trials=0)
        with pytest.raises(ValueError):
            run_quality_sweep([spec], ratios=[1.5], keep_final=3, trials=1)

    def test_csv_one_row_per_cell(self):
        spec = SynthSpec(n_visual=8, n_textual=3, dim=4, coupling=0.2, seed=0)
        result = run_quality_sweep([spec], ratios=[0.9, 0.7], keep_final=3, trials=2)
        lines = result.to_csv().strip().splitlines()
        assert len(lines) == 3  # header + 2 cells
        assert lines[0].startswith("n_visual,")


class TestTiming:
    def test_contract(self):
        summary = run_timing(n=40, m=6, d=16, keep_final=8, repeats=3, seed=0)
        assert summary.repeats == 3
        for stage in (summary.stage1, summary.stage2, summary.total):
            assert stage.min_ms <= stage.mean_ms <= stage.max_ms
            assert stage.min_ms >= 0.0
        obj = summary.to_json_dict()
        assert set(obj) >= {"n", "m", "dim", "keep_final", "repeats", "stage1", "stage2", "total"}

    def test_requires_three_repeats(self):
        with pytest.raises(ValueError):
            run_timing(n=10, m=2, d=4, keep_final=2, repeats=2)

    def test_csv_shape(self):
        summary = run_timing(n=20, m=4, d=8, keep_final=4, repeats=3, seed=1)
        lines = summary.to_csv().strip().splitlines()
        assert lines[0] == "stage,mean_ms,min_ms,max_ms"
        assert [ln.split(",")[0] for ln in lines[1:]] == ["stage1", "stage2", "total"]
