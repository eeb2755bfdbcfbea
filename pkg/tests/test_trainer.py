"""Tests for the joint objective and the training loop."""
import numpy as np
import pytest

from checkpoint import CheckpointManager, read_checkpoint
from config import ModelConfig, TrainConfig
from corpus.dataset import EMOTION_INDEX, STRATEGY_INDEX
from corpus.pipeline import prepare_examples
from corpus.vocab import Vocab
from errors import ContractError, TrainingError
from modeling.model import LOSS_NAMES, TurnStateModel
from numerics import tensor as T
from numerics.tensor import Tensor
from stats_tracker import TrainingStats, format_duration
from tests.conftest import all_lines
from trainer import Trainer, total_loss


def _train_config(**overrides):
    values = dict(batch_size=2, base_lr=1e-3, warmup_steps=2, max_steps=4, seed=0,
                  checkpoint_every=100, eval_every=100)
    values.update(overrides)
    return TrainConfig(**values)


class TestTotalLoss:

    def test_weighted_sum(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            parts = rng.uniform(0, 10, size=4)
            gamma = tuple(rng.uniform(0, 2, size=4))
            assert total_loss(*parts, gamma) == pytest.approx(float(np.dot(parts, gamma)), abs=1e-12)

    def test_default_weights(self):
        assert total_loss(1.0, 1.0, 1.0, 1.0, TrainConfig().gamma) == pytest.approx(3.2)

    def test_non_finite_component_named(self):
        with pytest.raises(TrainingError, match="sem"):
            total_loss(1.0, float("nan"), 1.0, 1.0, (1, 1, 1, 1))

    def test_wrong_weight_count(self):
        with pytest.raises(ContractError):
            total_loss(1.0, 1.0, 1.0, 1.0, (1, 1, 1))

    def test_tensor_components_backpropagate(self):
        a = Tensor(2.0, requires_grad=True)
        loss = total_loss(a, Tensor(1.0), Tensor(1.0), a, (1.0, 0.2, 1.0, 3.0))
        loss.backward()
        assert float(a.grad) == pytest.approx(4.0)


class TestTrainStep:

    def test_step_records_trace(self, tiny_model, examples):
        trainer = Trainer(tiny_model, _train_config())
        result = trainer.train_step(examples[:2])
        assert trainer.step == 1
        assert result["lr"] == pytest.approx(1e-3 / 2)
        row = trainer.stats.trace[0]
        assert set(row) == {"step", "l_gen", "l_sem", "l_str", "l_emo", "total", "lr"}
        expected = total_loss(row["l_gen"], row["l_sem"], row["l_str"], row["l_emo"], trainer.config.gamma)
        assert row["total"] == pytest.approx(expected)

    def test_training_lowers_loss_on_the_same_batch(self, tiny_model, examples):
        trainer = Trainer(tiny_model, _train_config(base_lr=1e-2, warmup_steps=0))
        batch = examples[:2]
        before = trainer.evaluate_loss(batch)
        for _ in range(5):
            trainer.train_step(batch)
        assert trainer.evaluate_loss(batch) < before

    def test_non_finite_loss_aborts(self, tiny_model, examples, monkeypatch):
        trainer = Trainer(tiny_model, _train_config())
        broken = {name: Tensor(1.0) for name in LOSS_NAMES}
        broken["gen"] = Tensor(np.nan)
        monkeypatch.setattr(trainer, "example_losses", lambda example: broken)
        with pytest.raises(TrainingError):
            trainer.train(examples)
        assert trainer.stats.aborted_at == 1
        assert trainer.stats.errors["TrainingError"] == 1

    def test_empty_datasets(self, tiny_model):
        trainer = Trainer(tiny_model, _train_config())
        with pytest.raises(ContractError):
            trainer.train([])
        with pytest.raises(ContractError):
            trainer.evaluate_loss([])


class TestTrainingLoop:

    def test_runs_to_max_steps_and_checkpoints(self, tiny_model, examples, tmp_path):
        manager = CheckpointManager(tmp_path / "run")
        trainer = Trainer(tiny_model, _train_config(), checkpoints=manager, meta={"note": "x"})
        result = trainer.train(examples)
        assert result.steps == 4
        assert [row["step"] for row in result.trace] == [1, 2, 3, 4]
        _, meta = read_checkpoint(manager.latest())
        assert meta["step"] == 4 and meta["note"] == "x"

    def test_resume_matches_uninterrupted_run(self, tiny_config, vocab, examples, tmp_path):
        with T.precision(np.float32):
            straight = Trainer(TurnStateModel(tiny_config, len(vocab), vocab.special_ids, seed=0), _train_config())
            reference = straight.train(examples).trace

            manager = CheckpointManager(tmp_path / "run")
            first = Trainer(TurnStateModel(tiny_config, len(vocab), vocab.special_ids, seed=0),
                            _train_config(max_steps=2, checkpoint_every=2), checkpoints=manager)
            first.train(examples)

            second = Trainer(TurnStateModel(tiny_config, len(vocab), vocab.special_ids, seed=5),
                             _train_config(), checkpoints=manager)
            assert second.resume() == 2
            resumed = second.train(examples).trace

        assert [row["step"] for row in resumed] == [3, 4]
        for got, want in zip(resumed, reference[2:]):
            for column in ("l_gen", "l_sem", "l_str", "l_emo", "total", "lr"):
                assert got[column] == pytest.approx(want[column], rel=1e-6)

    def test_resume_without_checkpoint_starts_fresh(self, tiny_model, tmp_path):
        trainer = Trainer(tiny_model, _train_config(), checkpoints=CheckpointManager(tmp_path))
        assert trainer.resume() == 0

    def test_early_stopping(self, tiny_model, examples, tmp_path, monkeypatch):
        manager = CheckpointManager(tmp_path / "run")
        trainer = Trainer(tiny_model, _train_config(max_steps=10, eval_every=1, patience=2), checkpoints=manager)
        losses = iter([3.0, 2.0, 2.5, 2.1])
        monkeypatch.setattr(trainer, "evaluate_loss", lambda dev: next(losses))

        result = trainer.train(examples[:4], dev=examples[4:])
        assert result.stopped_early
        assert result.steps == 4
        assert result.best_dev_loss == 2.0
        _, meta = read_checkpoint(manager.best_path)
        assert meta["step"] == 2

    def test_same_seed_gives_identical_trajectories(self, tiny_config, vocab, examples):
        traces = []
        for _ in range(2):
            trainer = Trainer(TurnStateModel(tiny_config, len(vocab), vocab.special_ids, seed=0), _train_config())
            traces.append(trainer.train(examples).trace)
        assert traces[0] == traces[1]

    def test_first_step_generation_loss_ignores_auxiliary_weights(self, tiny_config, vocab, examples):
        values = []
        for gamma in [(1.0, 0.0, 0.0, 0.0), TrainConfig().gamma]:
            trainer = Trainer(TurnStateModel(tiny_config, len(vocab), vocab.special_ids, seed=0),
                              _train_config(gamma=gamma))
            trainer.train_step(examples[:2])
            values.append(trainer.stats.trace[0]["l_gen"])
        assert values[0] == values[1]


@pytest.mark.slow
def test_overfits_a_tiny_corpus(dialogue_factory):
    vocab = Vocab.build(all_lines())
    examples = prepare_examples(dialogue_factory(count=16), vocab, k=3, w=2, seed=0)
    config = ModelConfig(d_model=32, encoder_layers=1, decoder_layers=1, encoder_heads=2, decoder_heads=2,
                         graph_heads=2, emotion_heads=2, max_len=64, max_target_len=24)
    model = TurnStateModel(config, len(vocab), vocab.special_ids, seed=0)
    trainer = Trainer(model, _train_config(base_lr=5e-3, warmup_steps=20, max_steps=500, batch_size=16))
    result = trainer.train(examples)

    model.train(False)
    gen, strategy_hits, strategy_total, emotion_hits, emotion_total = 0.0, 0, 0, 0, 0
    with T.no_grad():
        for example in examples:
            output = model(example)
            gen += output.losses["gen"].item() / len(examples)
            heads, context = output.context.heads, output.context
            predicted = np.argmax(heads.strategy_logits.data, axis=-1)
            for guess, gold in zip(predicted, context.strategy_golds):
                strategy_hits += int(guess == STRATEGY_INDEX[gold])
                strategy_total += 1
            if heads.emotion_logits is not None:
                predicted = np.argmax(heads.emotion_logits.data, axis=-1)
                for guess, gold in zip(predicted, context.emotion_golds):
                    emotion_hits += int(guess == EMOTION_INDEX[gold])
                    emotion_total += 1

    assert gen < 0.5
    assert strategy_total and strategy_hits == strategy_total
    assert emotion_total and emotion_hits == emotion_total
    assert result.trace[-1]["l_sem"] <= 0.2 * result.trace[0]["l_sem"]
    averages = trainer.stats.moving_average(10)
    sampled = averages[9:200:20]
    assert all(later < earlier for earlier, later in zip(sampled, sampled[1:]))
    assert averages[-1] < averages[9]


class TestTrainingStats:

    @pytest.mark.parametrize("seconds,text", [(12.34, "12.3s"), (125, "2m 5s"), (7260, "2h 1m")])
    def test_format_duration(self, seconds, text):
        assert format_duration(seconds) == text

    def test_moving_average(self):
        stats = TrainingStats()
        for step, total in enumerate([4.0, 2.0, 6.0], start=1):
            stats.record_step(step, {"gen": 0, "sem": 0, "str": 0, "emo": 0}, total, 1e-3, 0.5, False, 2)
        assert stats.moving_average(window=2) == [4.0, 3.0, 4.0]
        assert stats.get_summary()["examples_seen"] == 6

    def test_stage_time_accumulates(self):
        stats = TrainingStats()
        for _ in range(2):
            with stats.stage("step"):
                pass
        assert set(stats.stage_times) == {"step"}
