"""Engine configuration loading and the command-line interface."""

import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from rahp.cli import main
from rahp.config import EngineConfig
from rahp.synthetic import generate_corpus


class TestEngineConfig:
    def test_defaults(self):
        cfg = EngineConfig()
        assert (cfg.alpha, cfg.k, cfg.top_m, cfg.num_super) == (0.25, 3, 100, 30)
        assert (cfg.lambda1, cfg.lambda2, cfg.lambda3) == (2.0, 1.0, 20.0)
        assert (cfg.focal_gamma, cfg.focal_balance) == (2.0, 0.25)
        assert cfg.softmax_temperature == 1.0
        assert cfg.iou_thresh == 0.5

    def test_load_toml(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text("alpha = 0.5\nk = 5\n")
        cfg = EngineConfig.load(path)
        assert cfg.alpha == 0.5 and cfg.k == 5
        assert cfg.top_m == 100  # untouched default

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text("alhpa = 0.5\n")
        with pytest.raises(ValueError, match="alhpa"):
            EngineConfig.load(path)

    def test_flag_override_beats_file(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text("alpha = 0.5\n")
        cfg = EngineConfig.load(path).override(alpha=0.75, k=None)
        assert cfg.alpha == 0.75 and cfg.k == 3

    @pytest.mark.parametrize("bad", [{"alpha": 1.5}, {"k": 0}, {"top_m": 0},
                                     {"softmax_temperature": 0.0},
                                     {"iou_thresh": 0.0}])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            EngineConfig(**bad)


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """A small corpus plus one full pipeline run through the CLI."""
    root = tmp_path_factory.mktemp("pipeline")
    corpus = root / "corpus"
    generate_corpus(corpus, n_images=3, n_proposals=25, n_entities=24,
                    n_predicates=8, num_super=4, dim=32, seed=5)
    runner = CliRunner()

    def run(*args):
        result = runner.invoke(main, list(args), catch_exceptions=False)
        assert result.exit_code == 0, result.output
        return result

    run("cluster", "--embeddings", str(corpus / "entity_emb.bin"),
        "--names", str(corpus / "names.json"), "--num-super", "4",
        "--out", str(root / "smap.json"))
    run("score", "--corpus", str(corpus), "--smap", str(root / "smap.json"),
        "--out", str(root / "scores"))
    run("infer", "--corpus", str(corpus), "--scores", str(root / "scores"),
        "--out", str(root / "graphs"))
    run("eval", "--graphs", str(root / "graphs"),
        "--gt", str(corpus / "gt.json"), "--vocab", str(corpus / "vocab.json"),
        "--out", str(root / "report.json"))
    return root


class TestPipelineCommands:
    def test_artifacts_exist(self, pipeline_dir):
        assert (pipeline_dir / "smap.json").exists()
        assert len(list((pipeline_dir / "scores").glob("*.json"))) == 3
        assert len(list((pipeline_dir / "graphs").glob("*.json"))) == 3
        report = json.loads((pipeline_dir / "report.json").read_text())
        assert set(report["splits"]) == {"total", "base", "novel"}

    def test_planted_corpus_scores_well(self, pipeline_dir):
        report = json.loads((pipeline_dir / "report.json").read_text())
        assert report["splits"]["total"]["recall"]["100"] > 0.5

    def test_rescoring_is_byte_identical(self, pipeline_dir):
        runner = CliRunner()
        corpus = pipeline_dir / "corpus"
        for threads in ("1", "3"):
            result = runner.invoke(main, [
                "score", "--corpus", str(corpus),
                "--smap", str(pipeline_dir / "smap.json"),
                "--threads", threads,
                "--out", str(pipeline_dir / f"scores_t{threads}"),
            ], catch_exceptions=False)
            assert result.exit_code == 0
        for p in sorted((pipeline_dir / "scores").glob("*.json")):
            a = p.read_bytes()
            assert (pipeline_dir / "scores_t1" / p.name).read_bytes() == a
            assert (pipeline_dir / "scores_t3" / p.name).read_bytes() == a

    def test_prompts_command(self, pipeline_dir):
        runner = CliRunner()
        corpus = pipeline_dir / "corpus"
        out = pipeline_dir / "prompts.json"
        result = runner.invoke(main, [
            "prompts", "--vocab", str(corpus / "vocab.json"),
            "--smap", str(pipeline_dir / "smap.json"),
            "--regions", str(corpus / "regions.json"), "--out", str(out),
        ], catch_exceptions=False)
        assert result.exit_code == 0
        doc = json.loads(out.read_text())
        assert len(doc["entity_prompts"]) == 4 * 4 * 8
        assert all(p.startswith("A region that reflects")
                   for p in doc["region_prompts"])

    def test_sweep_command(self, pipeline_dir):
        runner = CliRunner()
        corpus = pipeline_dir / "corpus"
        out = pipeline_dir / "sweep.json"
        result = runner.invoke(main, [
            "sweep", "--corpus", str(corpus),
            "--smap", str(pipeline_dir / "smap.json"),
            "--alphas", "0,1", "--ks-select", "2", "--out", str(out),
        ], catch_exceptions=False)
        assert result.exit_code == 0
        reports = json.loads(out.read_text())
        assert len(reports) == 2
        assert reports[0]["metadata"]["override"] == {"alpha": 0.0, "k": 2}


class TestCliErrors:
    def test_usage_error_exit_2(self):
        result = CliRunner().invoke(main, ["cluster"])
        assert result.exit_code == 2

    def test_engine_error_exit_1_single_line(self, tmp_path):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
        names = tmp_path / "names.json"
        names.write_text('["a"]')
        result = CliRunner().invoke(main, [
            "cluster", "--embeddings", str(bad), "--names", str(names),
            "--num-super", "1", "--out", str(tmp_path / "o.json"),
        ])
        assert result.exit_code == 1
        lines = [l for l in result.stderr.strip().splitlines() if l]
        assert len(lines) == 1
        assert lines[0].startswith("error kind=MalformedHeader")

    def test_bad_config_file(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("nonsense_key = 1\n")
        result = CliRunner().invoke(main, [
            "--config", str(cfg), "loss-check", "--trials", "1",
        ])
        assert result.exit_code == 1
        assert "nonsense_key" in result.stderr


def test_loss_check_command():
    result = CliRunner().invoke(main, ["loss-check", "--trials", "20"],
                                catch_exceptions=False)
    assert result.exit_code == 0
    assert result.output.count("[pass]") == 4


def test_mine_commands(tmp_path):
    from importlib import resources

    fixtures = str(resources.files("rahp.fixtures") / "mining")
    runner = CliRunner()
    out = tmp_path / "mined.json"
    result = runner.invoke(main, [
        "mine", "regions", "--subject", "human", "--predicate", "holding",
        "--object", "wild animal", "--fixtures", fixtures, "--out", str(out),
    ], catch_exceptions=False)
    assert result.exit_code == 0
    doc = json.loads(out.read_text())
    assert len(doc["human|holding|wild animal"]) == 11

    clusters = tmp_path / "clusters.json"
    clusters.write_text(json.dumps([["cat", "dog"]]))
    names_out = tmp_path / "names.json"
    result = runner.invoke(main, [
        "mine", "names", "--clusters", str(clusters), "--fixtures", fixtures,
        "--out", str(names_out),
    ], catch_exceptions=False)
    assert result.exit_code == 0
    assert json.loads(names_out.read_text()) == ["pets"]
