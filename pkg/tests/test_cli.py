"""End-to-end tests for the command-line interface."""
import json

import pandas as pd
import pytest
from click.testing import CliRunner

from cli import cli, run
from corpus.dataset import load_esconv, save_dialogues
from exports.jsonl_export import GENERATION_FIELDS, load_generations
from stats_tracker import LOSS_COLUMNS

from tests.conftest import build_dialogues

TINY_RUN = {
    "model": {"d_model": 16, "encoder_layers": 1, "decoder_layers": 1, "encoder_heads": 2, "decoder_heads": 2,
              "graph_heads": 2, "emotion_heads": 2, "max_len": 64, "max_target_len": 16},
    "corpus": {"keywords_k": 3},
    "train": {"max_steps": 2, "batch_size": 4, "warmup_steps": 1, "checkpoint_every": 1, "seed": 0},
    "generation": {"max_new_tokens": 4},
}


@pytest.fixture
def workspace(tmp_path):
    save_dialogues(build_dialogues(count=10), tmp_path / "all.json")
    (tmp_path / "run.json").write_text(json.dumps(TINY_RUN), encoding="utf-8")
    return tmp_path


@pytest.fixture
def trained(workspace):
    assert run(["--config", str(workspace / "run.json"), "split", str(workspace / "all.json"),
                str(workspace / "data"), "--seed", "7"]) == 0
    assert run(["--config", str(workspace / "run.json"), "train", "--train", str(workspace / "data" / "train.json"),
                "--run-dir", str(workspace / "run")]) == 0
    return workspace


class TestSplit:

    def test_eight_one_one(self, workspace):
        out = workspace / "data"
        code = run(["split", str(workspace / "all.json"), str(out), "--ratio", "8:1:1", "--seed", "7"])
        assert code == 0
        sizes = [len(load_esconv(out / f"{name}.json")) for name in ("train", "dev", "test")]
        assert sizes == [8, 1, 1]

    def test_bad_ratio_is_usage_error(self, workspace):
        assert run(["split", str(workspace / "all.json"), str(workspace / "data"), "--ratio", "8-1-1"]) == 2


class TestAnnotate:

    def test_writes_keywords_and_vocab(self, workspace):
        out = workspace / "annotated.json"
        assert run(["annotate", str(workspace / "all.json"), str(out), "-k", "2"]) == 0
        assert (workspace / "annotated.vocab.json").exists()
        dialogues = load_esconv(out)
        assert all(len(u.keywords or []) <= 2 for d in dialogues for u in d.utterances)


class TestTrain:

    def test_writes_checkpoint_and_loss_csv(self, trained):
        run_dir = trained / "run"
        assert (run_dir / "step-000002.ckpt").exists()
        assert (run_dir / "vocab.json").exists()
        frame = pd.read_csv(run_dir / "losses.csv")
        assert list(frame.columns) == LOSS_COLUMNS
        assert frame["step"].tolist() == [1, 2]

    def test_echoes_settings(self, workspace, capsys):
        args = ["--config", str(workspace / "run.json"), "train", "--train", str(workspace / "all.json"),
                "--run-dir", str(workspace / "run"), "--gamma", "1,0.2,1,1", "--lr", "2e-5", "--warmup", "120",
                "--batch", "20", "--window", "2", "--max-steps", "1"]
        assert run(args) == 0
        out = capsys.readouterr().out
        assert "gamma=[1.0, 0.2, 1.0, 1.0] lr=2e-05 warmup=120 batch=20 window=2" in out
        assert "parameters, vocabulary" in out

    def test_resume_appends_losses(self, trained):
        run_dir = trained / "run"
        config = json.loads((trained / "run.json").read_text())
        config["train"]["max_steps"] = 3
        (trained / "longer.json").write_text(json.dumps(config))
        assert run(["--config", str(trained / "longer.json"), "train", "--train",
                    str(trained / "data" / "train.json"), "--run-dir", str(run_dir), "--resume"]) == 0
        assert pd.read_csv(run_dir / "losses.csv")["step"].tolist() == [1, 2, 3]

    def test_dev_evaluation_writes_best_checkpoint(self, workspace):
        config = json.loads((workspace / "run.json").read_text())
        config["train"]["eval_every"] = 1
        (workspace / "dev.json").write_text(json.dumps(config))
        save_dialogues(build_dialogues(count=2, seed=9), workspace / "dev_data.json")
        assert run(["--config", str(workspace / "dev.json"), "train", "--train", str(workspace / "all.json"),
                    "--dev", str(workspace / "dev_data.json"), "--run-dir", str(workspace / "run")]) == 0
        assert (workspace / "run" / "best.ckpt").exists()
        assert pd.read_csv(workspace / "run" / "dev_losses.csv")["step"].tolist() == [1, 2]

    def test_wrong_gamma_count(self, workspace):
        assert run(["train", "--train", str(workspace / "all.json"), "--run-dir", str(workspace / "run"),
                    "--gamma", "1,2"]) == 2

    def test_missing_required_option(self):
        assert run(["train"]) == 2


class TestEvalAndGenerate:

    def test_eval_writes_report(self, trained):
        out = trained / "report.json"
        gens = trained / "eval.jsonl"
        assert run(["eval", "--checkpoint", str(trained / "run"), "--data", str(trained / "data" / "test.json"),
                    "--out", str(out), "--generations", str(gens)]) == 0
        report = json.loads(out.read_text())
        assert {"ppl", "b2", "b4", "rl", "d1", "d2", "acc", "acc_top_n"} <= set(report)
        assert report["acc_top_n"]["8"] == 1.0
        assert len(load_generations(gens)) == report["count"]

    def test_generate_is_deterministic(self, trained):
        args = ["generate", "--checkpoint", str(trained / "run"), "--data", str(trained / "data" / "test.json"),
                "--top-p", "0.3", "--top-k", "30", "--temperature", "0.7", "--rep-penalty", "1.03", "--seed", "1"]
        assert run(args + ["--out", str(trained / "a.jsonl")]) == 0
        assert run(args + ["--out", str(trained / "b.jsonl")]) == 0
        assert (trained / "a.jsonl").read_bytes() == (trained / "b.jsonl").read_bytes()
        records = load_generations(trained / "a.jsonl")
        assert records and all(tuple(r) == GENERATION_FIELDS for r in records)

    def test_chat(self, trained):
        result = CliRunner().invoke(cli, ["chat", "--checkpoint", str(trained / "run")],
                                    input="i feel so sad and lonely\n\n")
        assert result.exit_code == 0, result.output
        assert "supporter [" in result.output


class TestErrors:

    def test_unknown_command(self):
        assert run(["fly"]) == 2

    def test_malformed_dataset(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("[{", encoding="utf-8")
        assert run(["split", str(bad), str(tmp_path / "out")]) == 1
        assert "Error" in capsys.readouterr().err

    def test_invalid_utf8_dataset(self, tmp_path):
        bad = tmp_path / "latin1.json"
        bad.write_bytes(b'[{"text": "caf\xe9"}]')
        assert run(["split", str(bad), str(tmp_path / "out")]) == 1

    def test_checkpoint_directory_without_checkpoint(self, tmp_path, workspace):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert run(["eval", "--checkpoint", str(empty), "--data", str(workspace / "all.json")]) == 1

    def test_config_from_environment(self, workspace, monkeypatch):
        bad = workspace / "bad_config.json"
        bad.write_text(json.dumps({"train": {"batch_size": 0}}), encoding="utf-8")
        monkeypatch.setenv("TURNSTATE_CONFIG", str(bad))
        assert run(["split", str(workspace / "all.json"), str(workspace / "data")]) == 1
        monkeypatch.setenv("TURNSTATE_CONFIG", str(workspace / "run.json"))
        assert run(["split", str(workspace / "all.json"), str(workspace / "data")]) == 0
