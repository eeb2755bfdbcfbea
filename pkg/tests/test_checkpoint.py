"""Tests for checkpoint files and resume bookkeeping."""
import numpy as np
import pytest

from checkpoint import (
    MAGIC, CheckpointManager, read_checkpoint, require_checkpoint, resolve_checkpoint, sidecar_path,
    write_checkpoint,
)
from errors import ParseError, TurnStateError


@pytest.fixture
def arrays():
    return {"encoder.weight": np.arange(6, dtype=float).reshape(2, 3), "bias": np.array([0.5, -1.25])}


class TestCheckpointFile:

    def test_write_then_read(self, tmp_path, arrays):
        path = write_checkpoint(tmp_path / "a.ckpt", arrays, {"step": 7})
        loaded, meta = read_checkpoint(path)
        assert set(loaded) == set(arrays)
        np.testing.assert_array_equal(loaded["encoder.weight"], arrays["encoder.weight"])
        assert loaded["bias"].dtype == np.float32
        assert meta == {"step": 7}

    def test_missing_sidecar_gives_empty_meta(self, tmp_path, arrays):
        path = write_checkpoint(tmp_path / "a.ckpt", arrays)
        assert not sidecar_path(path).exists()
        assert read_checkpoint(path)[1] == {}

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"hello world")
        with pytest.raises(ParseError):
            read_checkpoint(path)

    def test_truncated_payload(self, tmp_path, arrays):
        path = write_checkpoint(tmp_path / "a.ckpt", arrays)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ParseError):
            read_checkpoint(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "a.ckpt"
        path.write_bytes(MAGIC + b"\x01")
        with pytest.raises(ParseError):
            read_checkpoint(path)

    def test_no_temp_file_left_behind(self, tmp_path, arrays):
        write_checkpoint(tmp_path / "a.ckpt", arrays)
        assert [p.name for p in tmp_path.iterdir()] == ["a.ckpt"]


class TestCheckpointManager:

    def test_paths_and_latest(self, tmp_path, arrays):
        manager = CheckpointManager(tmp_path, keep=5)
        assert not manager.can_resume()
        for step in (3, 12, 7):
            manager.save_checkpoint(step, arrays, {})
        assert manager.latest().name == "step-000012.ckpt"
        assert manager.get_checkpoint()[1]["step"] == 12
        assert manager.get_checkpoint()[1]["saved_at"].endswith("+00:00")

    def test_prune_keeps_newest(self, tmp_path, arrays):
        manager = CheckpointManager(tmp_path, keep=2)
        for step in range(1, 5):
            manager.save_checkpoint(step, arrays, {})
        assert [p.name for p in manager.list_checkpoints()] == ["step-000003.ckpt", "step-000004.ckpt"]
        assert not sidecar_path(manager.path_for(1)).exists()

    def test_best_survives_pruning(self, tmp_path, arrays):
        manager = CheckpointManager(tmp_path, keep=1)
        manager.save_checkpoint(1, arrays, {"best_dev_loss": 1.5}, best=True)
        manager.save_checkpoint(2, arrays, {})
        assert manager.best_path.exists()
        assert read_checkpoint(manager.best_path)[1]["step"] == 1

    def test_clear(self, tmp_path, arrays):
        manager = CheckpointManager(tmp_path)
        manager.save_checkpoint(1, arrays, {}, best=True)
        manager.clear()
        assert manager.list_checkpoints() == []
        assert not manager.best_path.exists()

    def test_get_missing_checkpoint(self, tmp_path):
        assert CheckpointManager(tmp_path).get_checkpoint(tmp_path / "nope.ckpt") is None

    def test_print_status(self, tmp_path, arrays, capsys):
        manager = CheckpointManager(tmp_path)
        manager.print_status()
        assert "No checkpoint" in capsys.readouterr().out
        manager.save_checkpoint(4, arrays, {})
        manager.print_status()
        assert "step-000004.ckpt" in capsys.readouterr().out


class TestResolveCheckpoint:

    def test_directory_prefers_best(self, tmp_path, arrays):
        manager = CheckpointManager(tmp_path)
        manager.save_checkpoint(1, arrays, {}, best=True)
        manager.save_checkpoint(2, arrays, {})
        assert resolve_checkpoint(tmp_path) == manager.best_path

    def test_directory_falls_back_to_latest(self, tmp_path, arrays):
        manager = CheckpointManager(tmp_path)
        manager.save_checkpoint(1, arrays, {})
        manager.save_checkpoint(2, arrays, {})
        assert resolve_checkpoint(tmp_path) == manager.path_for(2)

    def test_empty_directory(self, tmp_path):
        with pytest.raises(TurnStateError):
            resolve_checkpoint(tmp_path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(TurnStateError):
            require_checkpoint(tmp_path / "absent.ckpt")
