"""CLI drivers: happy paths, artifact layout, determinism, error exits."""

import json
import math
from pathlib import Path

import pytest

from trunclap.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def segment_spec(tmp_path, gap=0.004):
    spec = tmp_path / "segment.json"
    spec.write_text(json.dumps({
        "type": "segment", "p0": [0, 0, 0], "p1": [1, 0, 0], "gap": gap}))
    return spec


def read_tree(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestPkEval:
    def test_prints_truncated_trace(self, capsys):
        assert run("pk-eval", "--matrix", "[[5,0,0],[0,-2,0],[0,0,1]]",
                   "--k", 2) == 0
        assert capsys.readouterr().out.strip() == "-1"

    def test_with_gradient_and_drift(self, capsys):
        assert run("pk-eval", "--matrix", "[[4,0],[0,-1]]", "--k", 1,
                   "--h", 0.5, "--gradient", "[3,4]") == 0
        assert float(capsys.readouterr().out) == pytest.approx(-3.5)


class TestBarrier:
    def test_artifacts(self, tmp_path):
        out = tmp_path / "b"
        assert run("barrier", "--k", 2, "--hR", "0.5", "--a", "0.1",
                   "--out", out, "--figures") == 0
        summary = json.loads((out / "barrier.json").read_text())
        assert summary["min_residual"] >= -1e-8
        assert summary["sup_norm"] <= summary["sup_bound"]
        assert (out / "profile.csv").exists()
        assert (out / "profile.png").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "barrier"
        assert "inputs_sha256" in manifest


class TestCoverAndCertify:
    def test_cover(self, tmp_path):
        out = tmp_path / "c"
        spec = segment_spec(tmp_path)
        assert run("cover", "--set", spec, "--delta", "0.1", "--k", 2,
                   "--out", out) == 0
        summary = json.loads((out / "cover_summary.json").read_text())
        assert summary["balls"] >= 5
        assert summary["Q"] > 0
        assert (out / "cover.json").exists()

    def test_certify_passes(self, tmp_path):
        out = tmp_path / "cert"
        spec = segment_spec(tmp_path)
        assert run("certify", "--set", spec, "--k", 2, "--hR", "0",
                   "--delta", "0.1", "--out", out) == 0
        summary = json.loads((out / "verify_summary.json").read_text())
        assert summary["passed"] is True
        assert summary["min_inside"] >= 1 - 1e-6
        assert summary["eigen_lower_bound"] > 0


class TestEig:
    def test_box_square(self, tmp_path):
        out = tmp_path / "eig"
        assert run("eig", "--shape", "box", "--R", 1.0, "--dim", 2,
                   "--spacing", 1 / 16, "--k", 2, "--out", out,
                   "--figures") == 0
        est = json.loads((out / "eigen.json").read_text())
        assert est["mu"] == pytest.approx(2 * math.pi ** 2, rel=0.03)
        assert (out / "eigenfunction.csv").exists()
        assert (out / "eigenfunction.png").exists()

    def test_shooting_method(self, tmp_path):
        out = tmp_path / "shoot"
        assert run("eig", "--shape", "ball", "--R", 1.0, "--dim", 2,
                   "--k", 2, "--method", "shooting", "--out", out) == 0
        est = json.loads((out / "eigen.json").read_text())
        assert est["mu"] == pytest.approx(5.7832, rel=1e-3)


class TestVerifyBound:
    def test_bound_table(self, tmp_path):
        out = tmp_path / "vb"
        spec = segment_spec(tmp_path)
        assert run("verify-bound", "--set", spec, "--k", 2, "--hR", "0",
                   "--deltas", "0.1,0.05", "--out", out, "--figures") == 0
        summary = json.loads((out / "bound_summary.json").read_text())
        rows = summary["rows"]
        assert rows[0]["Q"] > rows[1]["Q"]
        assert rows[1]["lower_bound"] > rows[0]["lower_bound"]
        assert (out / "bound_table.csv").exists()
        assert (out / "bounds.png").exists()


class TestAnnulus:
    def test_reports_trend_flag(self, tmp_path):
        out = tmp_path / "ann"
        assert run("annulus", "--eps", "0.3,0.2", "--spacing", "0.15",
                   "--out", out) == 0
        summary = json.loads((out / "annulus_summary.json").read_text())
        assert len(summary["rows"]) == 2
        assert "strictly_decreasing" in summary
        assert (out / "annulus.csv").exists()


class TestScaleCheck:
    def test_scaled_quantities(self, tmp_path):
        out = tmp_path / "sc"
        assert run("scale-check", "--scales", "2", "--resolution", 16,
                   "--out", out) == 0
        rows = json.loads((out / "scale_summary.json").read_text())["rows"]
        assert rows[0]["mu_times_s2"] == pytest.approx(
            rows[1]["mu_times_s2"], rel=1e-9)
        assert rows[0]["bound_times_s2"] == pytest.approx(
            rows[1]["bound_times_s2"], rel=1e-9)


class TestReportConstants:
    def test_stdout(self, capsys):
        assert run("report-constants", "--k", 2, "--hR", "0.5") == 0
        report = json.loads(capsys.readouterr().out)
        hs = report["hstar"]["value"]
        assert hs == pytest.approx(max(0.5, 0.5 / (2 - 0.5)))
        c1 = report["C1"]["value"]
        assert c1 == pytest.approx(
            2 * (1 + hs) / 2 * report["C0"]["value"] * report["S_hat"]["value"])

    def test_rejects_degenerate(self):
        with pytest.raises(SystemExit):
            run("report-constants", "--k", 1, "--hR", "1.5")


class TestDeterminism:
    def test_certify_reruns_byte_identical(self, tmp_path):
        spec = segment_spec(tmp_path)
        trees = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert run("certify", "--set", spec, "--k", 2, "--hR", "0",
                       "--delta", "0.1", "--out", out) == 0
            trees.append(read_tree(out))
        assert trees[0] == trees[1]


class TestErrors:
    def test_unknown_sample_type(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"type": "fractal"}))
        with pytest.raises(SystemExit):
            run("cover", "--set", bad, "--delta", "0.1",
                "--out", tmp_path / "o")

    def test_module_error_becomes_diagnostic_exit(self, tmp_path, capsys):
        # delta below twice the sampling gap is rejected by the cover module
        spec = segment_spec(tmp_path, gap=0.2)
        code = run("cover", "--set", spec, "--delta", "0.1",
                   "--out", tmp_path / "o")
        assert code == 2
        err = capsys.readouterr().err
        assert "delta" in err
