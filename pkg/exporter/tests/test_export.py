"""Exporter conformance: bit-valid TPK output the pruning engine consumes
end-to-end. The engine is exercised through its CLI only."""

import json
import struct
import subprocess
from pathlib import Path

import numpy as np
import pytest

from tpk_exporter import (
    ImageDecodeError,
    ModelLoadError,
    UnexpectedShapeError,
    export,
    read_tpk_header,
    write_tpk,
)
from tpk_exporter.cli import main

DATA = Path(__file__).parent / "data"


def run_engine(*argv):
    return subprocess.run(
        ["prunekit", *argv], capture_output=True, text=True, timeout=300
    )


class TestTpkWriter:
    def test_matches_golden_fixture(self, tmp_path):
        rows = np.array([[1.5, -2.25, 0.5], [0.0, 3.75, -1.0]], dtype=np.float32)
        path = tmp_path / "out.tpk"
        write_tpk(rows, modality=0, path=path)
        assert path.read_bytes() == (DATA / "fixture_2x3.tpk").read_bytes()

    def test_engine_reads_golden_fixture(self):
        result = run_engine("objective", "--tokens", str(DATA / "fixture_2x3.tpk"))
        assert result.returncode == 0, result.stderr
        json.loads(result.stdout)

    def test_header_round_trip(self, tmp_path):
        rows = np.zeros((4, 7), dtype=np.float32)
        path = tmp_path / "z.tpk"
        write_tpk(rows, modality=1, path=path)
        assert read_tpk_header(path) == (1, 4, 7)

    def test_rejects_non_finite(self, tmp_path):
        rows = np.array([[np.nan]], dtype=np.float32)
        with pytest.raises(ValueError):
            write_tpk(rows, modality=0, path=tmp_path / "bad.tpk")


class TestExport:
    def test_llava_geometry_and_engine_round_trip(self, tiny_llava_dir, sample_image, tmp_path):
        out_dir = tmp_path / "dump"
        manifest = export(str(tiny_llava_dir), str(sample_image), "what is shown?", out_dir)

        n, m, d = manifest.dims
        assert n == 576  # 336px / patch 14 -> 24 x 24 patches
        assert m >= 1

        # headers agree with the manifest, modality codes are correct
        assert read_tpk_header(manifest.visual_file) == (0, n, d)
        assert read_tpk_header(manifest.textual_file) == (1, m, d)
        saved = json.loads((out_dir / "manifest.json").read_text())
        assert saved["dims"] == [n, m, d]
        assert saved["layer"] == manifest.layer

        # the engine validates both files and prunes end-to-end with defaults
        result = run_engine(
            "prune",
            "--visual", manifest.visual_file,
            "--text", manifest.textual_file,
            "--keep", "64",
        )
        assert result.returncode == 0, result.stderr
        report = json.loads(result.stdout)
        assert len(report["stage2_indices"]) == 64
        assert len(report["stage1_indices"]) == 461  # 0.8 * 576 rounded
        assert set(report["stage2_indices"]) <= set(report["stage1_indices"])

    def test_empty_prompt_still_has_text_tokens(self, tiny_llava_dir, sample_image, tmp_path):
        manifest = export(str(tiny_llava_dir), str(sample_image), "", tmp_path / "dump")
        assert manifest.dims[1] >= 1

    def test_cli_matches_library(self, tiny_llava_dir, sample_image, tmp_path, capsys):
        out_dir = tmp_path / "dump"
        code = main([
            "--model", str(tiny_llava_dir), "--image", str(sample_image),
            "--prompt", "a photo of", "--out", str(out_dir),
        ])
        assert code == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed == json.loads((out_dir / "manifest.json").read_text())

    def test_model_load_failure(self, sample_image, tmp_path):
        with pytest.raises(ModelLoadError, match="no/such/model"):
            export("no/such/model", str(sample_image), "hi", tmp_path)

    def test_image_decode_failure(self, tiny_llava_dir, tmp_path):
        bogus = tmp_path / "not_an_image.png"
        bogus.write_bytes(b"definitely not a png")
        with pytest.raises(ImageDecodeError):
            export(str(tiny_llava_dir), str(bogus), "hi", tmp_path / "dump")

    def test_unexpected_feature_shape(self, tiny_llava_dir, sample_image, tmp_path, monkeypatch):
        import importlib

        export_mod = importlib.import_module("tpk_exporter.export")

        def broken(model, pixel_values):
            raise UnexpectedShapeError("projected image features have shape (3, 3, 3, 3)")

        monkeypatch.setattr(export_mod, "_projected_image_features", broken)
        with pytest.raises(UnexpectedShapeError):
            export_mod.export(str(tiny_llava_dir), str(sample_image), "hi", tmp_path / "dump")

    def test_cli_exit_codes(self, sample_image, tmp_path, capsys):
        assert main(["--image", str(sample_image), "--out", str(tmp_path)]) == 1
        assert main([
            "--model", "no/such/model", "--image", str(sample_image), "--out", str(tmp_path),
        ]) == 2
