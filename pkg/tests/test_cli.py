import dataclasses
import io
import os

import numpy as np
import pytest

from emocause.cli import main
from emocause.config import load_config, resolved_text

from conftest import make_tiny_config


def write_config(path, cfg):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(resolved_text(cfg))
    return str(path)


@pytest.fixture()
def cli_config(store_files, corpus20, tmp_path):
    cfg = make_tiny_config(store_files, corpus20[1], tmp_path / "out",
                           detector="oracle", annotations_path=corpus20[2],
                           cache_dir=str(tmp_path / "cache"), max_steps=15,
                           validate_every=0)
    return cfg, write_config(tmp_path / "run.cfg", cfg)


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestConfigFile:
    def test_round_trip(self, cli_config):
        cfg, path = cli_config
        again = load_config(path)
        assert resolved_text(again) == resolved_text(cfg)

    def test_unknown_key_is_rejected(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("definitely_not_a_key = 3\n", encoding="utf-8")
        code, out, err = run_cli(["train", "--config", str(bad)], capsys)
        assert code == 2
        assert "definitely_not_a_key" in err
        assert err.count("\n") == 1  # one-line reason

    def test_override_pairs(self, cli_config, capsys):
        cfg, path = cli_config
        code, out, err = run_cli(
            ["build-graphs", "--config", path, "--top_k", "oops"], capsys)
        assert code == 2

    def test_missing_file_is_reported(self, cli_config, capsys):
        cfg, path = cli_config
        code, out, err = run_cli(
            ["evaluate", "--config", path, "--store_path", "/nope/missing.tsv"],
            capsys)
        assert code == 2
        assert "missing.tsv" in err


class TestBuildGraphs:
    def test_second_run_hits_cache_fully(self, cli_config, capsys):
        cfg, path = cli_config
        code, out, _ = run_cli(["build-graphs", "--config", path], capsys)
        assert code == 0
        assert "cache hits: 0/" in out
        code, out, _ = run_cli(["build-graphs", "--config", path], capsys)
        assert code == 0
        assert "(100%)" in out

    def test_worker_pool_matches_serial(self, cli_config, capsys, tmp_path):
        cfg, path = cli_config
        code, _, _ = run_cli(["build-graphs", "--config", path], capsys)
        assert code == 0
        other_cache = tmp_path / "cache2"
        code, out, _ = run_cli(
            ["build-graphs", "--config", path, "--workers", "2",
             "--cache_dir", str(other_cache)], capsys)
        assert code == 0
        serial = sorted(os.listdir(cfg.cache_dir))
        parallel = sorted(os.listdir(other_cache))
        assert serial == parallel
        for name in serial:
            a = open(os.path.join(cfg.cache_dir, name), encoding="utf-8").read()
            b = open(os.path.join(other_cache, name), encoding="utf-8").read()
            assert a == b


class TestTrain:
    def test_artifacts_and_echo(self, cli_config, capsys):
        cfg, path = cli_config
        code, out, _ = run_cli(["train", "--config", path], capsys)
        assert code == 0
        assert os.path.exists(os.path.join(cfg.output_dir, "model.ckpt"))
        assert os.path.exists(os.path.join(cfg.output_dir, "metrics.log"))
        resolved = os.path.join(cfg.output_dir, "config.resolved")
        assert os.path.exists(resolved)
        assert "seed = 0" in open(resolved, encoding="utf-8").read()

    def test_identical_runs_modulo_timestamp_header(self, store_files, corpus20,
                                                    tmp_path, capsys):
        logs = []
        for name in ("a", "b"):
            cfg = make_tiny_config(store_files, corpus20[1], tmp_path / name,
                                   detector="oracle",
                                   annotations_path=corpus20[2],
                                   max_steps=10, validate_every=0)
            path = write_config(tmp_path / f"{name}.cfg", cfg)
            code, _, _ = run_cli(["train", "--config", path], capsys)
            assert code == 0
            lines = open(os.path.join(cfg.output_dir, "metrics.log"),
                         encoding="utf-8").read().splitlines()
            assert lines[0].startswith("# run ")  # timestamp confined here
            logs.append(lines[1:])
        assert logs[0] == logs[1]


class TestGenerateEvaluateTrace:
    def make_overfit_cli_cfg(self, overfit_run, tmp_path, **overrides):
        cfg = dataclasses.replace(
            overfit_run.cfg, output_dir=str(tmp_path / "cli-out"),
            split="train", **overrides)
        return cfg, write_config(tmp_path / "cli.cfg", cfg)

    def test_generate_beam_sizes_agree_on_memorized_data(self, overfit_run,
                                                         tmp_path, capsys):
        outputs = []
        for beam in (1, 5):
            cfg, path = self.make_overfit_cli_cfg(overfit_run, tmp_path)
            code, out, err = run_cli(
                ["generate", "--config", path, "--beam", str(beam)], capsys)
            assert code == 0, err
            outputs.append(out)
        assert outputs[0] == outputs[1]

    def test_generated_text_matches_gold(self, overfit_run, tmp_path, capsys):
        cfg, path = self.make_overfit_cli_cfg(overfit_run, tmp_path)
        code, out, _ = run_cli(["generate", "--config", path], capsys)
        assert code == 0
        lines = [ln for ln in out.splitlines() if ln.strip()]
        assert len(lines) == len(overfit_run.examples)
        gold = {ex.id: " ".join(ex.conversation.target_response)
                for ex in overfit_run.examples}
        exact = sum(1 for ln in lines
                    if gold[ln.split("\t")[0]] == ln.split("\t")[1])
        assert exact >= 18

    def test_evaluate_writes_report(self, overfit_run, tmp_path, capsys):
        cfg, path = self.make_overfit_cli_cfg(overfit_run, tmp_path)
        code, out, _ = run_cli(["evaluate", "--config", path], capsys)
        assert code == 0
        report = open(os.path.join(cfg.output_dir, "report.txt"),
                      encoding="utf-8").read()
        assert "ppl = " in report and "bleu = " in report
        assert "emotion_accuracy = " in report
        ppl = float([ln for ln in report.splitlines()
                     if ln.startswith("ppl")][0].split(" = ")[1])
        assert ppl <= 1.2

    def test_trace_subcommand_writes_score_trace(self, overfit_run, tmp_path,
                                                 capsys):
        target = overfit_run.examples[0].id
        cfg, path = self.make_overfit_cli_cfg(overfit_run, tmp_path,
                                              trace_ids=target)
        code, out, _ = run_cli(["trace", "--config", path], capsys)
        assert code == 0
        text = open(os.path.join(cfg.output_dir, "trace.txt"),
                    encoding="utf-8").read()
        assert text.startswith("score-trace v1\n")
        assert f"conversation {target}" in text
        assert "role=" in text and "score=" in text

    def test_generate_from_stdin(self, overfit_run, tmp_path, capsys,
                                 monkeypatch):
        csv_text = open(overfit_run.cfg.dataset_path, encoding="utf-8").read()
        head = "\n".join(csv_text.splitlines()[:3]) + "\n"
        monkeypatch.setattr("sys.stdin", io.StringIO(head))
        cfg, path = self.make_overfit_cli_cfg(overfit_run, tmp_path)
        code, out, err = run_cli(
            ["generate", "--config", path, "--stdin"], capsys)
        assert code == 0, err
        assert len([ln for ln in out.splitlines() if ln.strip()]) == 1
