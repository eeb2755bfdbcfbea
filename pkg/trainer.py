"""Joint-objective training loop."""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from checkpoint import CheckpointManager, read_checkpoint
from config import TrainConfig
from corpus.windows import Example, iterate_batches
from errors import ContractError, TrainingError
from modeling.model import LOSS_NAMES, TurnStateModel
from numerics import tensor as T
from numerics.optim import AdamW, clip_grad_norm
from numerics.tensor import Tensor
from stats_tracker import TrainingStats

logger = logging.getLogger(__name__)

Scalar = Union[Tensor, float]


def _value(x: Scalar) -> float:
    return x.item() if isinstance(x, Tensor) else float(x)


def total_loss(l_gen: Scalar, l_sem: Scalar, l_str: Scalar, l_emo: Scalar,
               gamma: Sequence[float]) -> Scalar:
    """γ1·L_gen + γ2·L_sem + γ3·L_str + γ4·L_emo."""
    if len(gamma) != 4:
        raise ContractError(f"Expected 4 loss weights, got {len(gamma)}")
    components = (("gen", l_gen), ("sem", l_sem), ("str", l_str), ("emo", l_emo))
    for name, value in components:
        if not math.isfinite(_value(value)):
            raise TrainingError(f"Non-finite {name} loss: {_value(value)}")
    total = 0.0
    for weight, (_, value) in zip(gamma, components):
        total = total + weight * value
    return total


@dataclass
class TrainResult:
    steps: int
    trace: List[Dict[str, float]]
    best_dev_loss: Optional[float]
    stopped_early: bool


class Trainer:
    """Runs AdamW steps over shuffled batches, with periodic dev evaluation and checkpoints."""

    def __init__(self, model: TurnStateModel, config: TrainConfig,
                 checkpoints: Optional[CheckpointManager] = None,
                 meta: Optional[Dict] = None, stats: Optional[TrainingStats] = None):
        self.model = model
        self.config = config
        self.checkpoints = checkpoints
        self.meta = dict(meta or {})
        self.stats = stats or TrainingStats()
        self.optimizer = AdamW(
            model.named_parameters(), lr=config.base_lr, betas=config.betas, eps=config.eps,
            weight_decay=config.weight_decay, warmup_steps=config.warmup_steps,
            schedule=config.lr_schedule, total_steps=config.max_steps,
        )
        self.best_dev_loss: Optional[float] = None
        self.bad_evals = 0
        self.saved_step: Optional[int] = None

    @property
    def step(self) -> int:
        return self.optimizer.state.step_count

    def example_losses(self, example: Example) -> Dict[str, Tensor]:
        return self.model(example).losses

    def train_step(self, batch: List[Example]) -> Dict[str, float]:
        """Accumulate batch-averaged gradients, clip, update. Returns mean components and total."""
        self.model.train()
        self.optimizer.zero_grad()
        sums = {name: 0.0 for name in LOSS_NAMES}
        total_value = 0.0
        for example in batch:
            losses = self.example_losses(example)
            loss = total_loss(losses["gen"], losses["sem"], losses["str"], losses["emo"], self.config.gamma)
            if isinstance(loss, Tensor) and loss.requires_grad:
                (loss / float(len(batch))).backward()
            for name in LOSS_NAMES:
                sums[name] += losses[name].item() / len(batch)
            total_value += _value(loss) / len(batch)

        grad_norm = clip_grad_norm(self.model.parameters(), self.config.grad_clip)
        lr = self.optimizer.step()
        self.stats.record_step(self.step, sums, total_value, lr, grad_norm,
                               clipped=grad_norm > self.config.grad_clip > 0, batch_size=len(batch))
        return dict(sums, total=total_value, lr=lr)

    def evaluate_loss(self, examples: List[Example]) -> float:
        """Mean joint loss over `examples` without recording gradients."""
        if not examples:
            raise ContractError("Cannot evaluate on an empty dataset")
        self.model.eval()
        total = 0.0
        with T.no_grad():
            for example in examples:
                losses = self.example_losses(example)
                total += _value(total_loss(losses["gen"], losses["sem"], losses["str"], losses["emo"],
                                           self.config.gamma))
        return total / len(examples)

    # -- checkpoints -------------------------------------------------------

    def _arrays(self) -> Dict[str, np.ndarray]:
        arrays = self.model.state_dict()
        arrays.update(self.optimizer.state_dict())
        return arrays

    def save(self, best: bool = False) -> None:
        if self.checkpoints is None:
            return
        meta = dict(self.meta, best_dev_loss=self.best_dev_loss, bad_evals=self.bad_evals,
                    rng_state=self.model.rng.bit_generator.state)
        self.checkpoints.save_checkpoint(self.step, self._arrays(), meta, best=best)
        self.saved_step = self.step

    def resume(self, path=None) -> int:
        """Restore model, optimizer and early-stopping state; returns the restored step."""
        if path is None:
            if self.checkpoints is None or not self.checkpoints.can_resume():
                logger.info("No checkpoint to resume from - starting from step 0")
                return 0
            path = self.checkpoints.latest()
        arrays, meta = read_checkpoint(path)
        params = {k: v for k, v in arrays.items() if not k.startswith("optim.")}
        self.model.load_state_dict(params)
        self.optimizer.load_state_dict({k: v for k, v in arrays.items() if k.startswith("optim.")},
                                       step_count=int(meta.get("step", 0)))
        self.best_dev_loss = meta.get("best_dev_loss")
        self.bad_evals = int(meta.get("bad_evals", 0))
        if "rng_state" in meta:
            self.model.rng.bit_generator.state = meta["rng_state"]
        logger.info(f"▶️  Resumed from {path} at step {self.step}")
        return self.step

    # -- loop --------------------------------------------------------------

    def _dev_check(self, dev: List[Example]) -> bool:
        """Evaluate on dev; returns True when patience is exhausted."""
        with self.stats.stage("dev evaluation"):
            dev_loss = self.evaluate_loss(dev)
        self.stats.record_dev(self.step, dev_loss)
        improved = self.best_dev_loss is None or dev_loss < self.best_dev_loss
        if improved:
            self.best_dev_loss = dev_loss
            self.bad_evals = 0
        else:
            self.bad_evals += 1
        logger.info(f"📏 Step {self.step}: dev loss {dev_loss:.4f}{' (best)' if improved else ''}")
        self.save(best=improved)
        return self.bad_evals >= self.config.patience

    def train(self, examples: List[Example], dev: Optional[List[Example]] = None) -> TrainResult:
        if not examples:
            raise ContractError("Cannot train on an empty dataset")
        cfg = self.config
        per_epoch = math.ceil(len(examples) / cfg.batch_size)
        stopped_early = False
        progress = tqdm(total=cfg.max_steps, initial=self.step, desc="Training")

        try:
            while self.step < cfg.max_steps and not stopped_early:
                epoch, skip = divmod(self.step, per_epoch)
                self.meta["epoch"] = epoch
                batches = iterate_batches(examples, cfg.batch_size, cfg.seed, epoch)
                for i, batch in enumerate(batches):
                    if i < skip:
                        continue
                    try:
                        with self.stats.stage("train step"):
                            result = self.train_step(batch)
                    except TrainingError as e:
                        self.stats.record_error(type(e).__name__)
                        self.stats.record_abort(self.step + 1)
                        logger.error(f"🛑 Aborting at step {self.step + 1}: {e}")
                        raise
                    progress.update(1)
                    progress.set_postfix(loss=f"{result['total']:.3f}", lr=f"{result['lr']:.2e}")

                    if dev and self.step % cfg.eval_every == 0:
                        stopped_early = self._dev_check(dev)
                    elif self.step % cfg.checkpoint_every == 0:
                        self.save()
                    if stopped_early:
                        logger.info(f"⏹️  Early stopping after {self.bad_evals} evaluations without improvement")
                        break
                    if self.step >= cfg.max_steps:
                        break
        finally:
            progress.close()

        if self.checkpoints is not None and self.saved_step != self.step:
            if dev:
                self._dev_check(dev)
            else:
                self.save()
        return TrainResult(self.step, list(self.stats.trace), self.best_dev_loss, stopped_early)
