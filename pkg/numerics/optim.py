"""AdamW with decoupled weight decay, linear warmup and global-norm clipping."""
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from errors import ConfigError, TrainingError
from numerics.layers import Parameter


@dataclass
class OptimizerState:
    """Moments and schedule of an AdamW run."""
    base_lr: float
    warmup_steps: int = 0
    betas: Tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.0
    eps: float = 1e-8
    schedule: str = "constant"  # constant | linear (after warmup)
    total_steps: Optional[int] = None
    step_count: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ConfigError(f"Learning rate must be positive, got {self.base_lr}")
        if self.warmup_steps < 0:
            raise ConfigError(f"warmup_steps must be non-negative, got {self.warmup_steps}")
        if not all(0.0 < b < 1.0 for b in self.betas):
            raise ConfigError(f"betas must lie in (0, 1), got {self.betas}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.schedule not in ("constant", "linear"):
            raise ConfigError(f"Unknown schedule: {self.schedule}. Must be constant or linear")
        if self.schedule == "linear" and not self.total_steps:
            raise ConfigError("Linear decay needs total_steps")


def learning_rate(state: OptimizerState, step: int) -> float:
    """Effective learning rate at 1-based `step`."""
    if state.warmup_steps > 0 and step < state.warmup_steps:
        return state.base_lr * step / state.warmup_steps
    if state.schedule == "linear":
        remaining = max(0, state.total_steps - step)
        span = max(1, state.total_steps - state.warmup_steps)
        return state.base_lr * min(1.0, remaining / span)
    return state.base_lr


def adamw_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
               state: OptimizerState) -> Tuple[Dict[str, np.ndarray], OptimizerState]:
    """One AdamW update. Returns new parameter arrays; `state` is advanced in place."""
    for name, grad in grads.items():
        if name not in params:
            raise ConfigError(f"Gradient for unknown parameter {name}")
        if grad.shape != params[name].shape:
            raise ConfigError(f"Gradient shape {grad.shape} != parameter shape {params[name].shape} for {name}")
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"Non-finite gradient in parameter {name}")

    state.step_count += 1
    t = state.step_count
    lr = learning_rate(state, t)
    beta1, beta2 = state.betas
    updated = dict(params)

    for name, grad in grads.items():
        p = params[name]
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v

        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        new = p * (1.0 - lr * state.weight_decay) if state.weight_decay else p
        updated[name] = (new - lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype)

    return updated, state


def clip_grad_norm(parameters: Iterable[Parameter], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most `max_norm`; returns the pre-clip norm."""
    params = [p for p in parameters if p.grad is not None]
    total = float(np.sqrt(sum(float(np.sum(p.grad.astype(np.float64) ** 2)) for p in params)))
    if max_norm > 0 and np.isfinite(total) and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad = p.grad * scale
    return total


class AdamW:
    """Stateful wrapper applying `adamw_step` to named module parameters."""

    def __init__(self, named_parameters: Iterable[Tuple[str, Parameter]], lr: float,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0, warmup_steps: int = 0,
                 schedule: str = "constant", total_steps: Optional[int] = None):
        self.params: Dict[str, Parameter] = dict(named_parameters)
        self.state = OptimizerState(
            base_lr=lr, warmup_steps=warmup_steps, betas=tuple(betas),
            weight_decay=weight_decay, eps=eps, schedule=schedule, total_steps=total_steps,
        )

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> float:
        """Apply one update to every parameter holding a gradient; returns the lr used."""
        grads = {name: p.grad for name, p in self.params.items() if p.grad is not None}
        arrays = {name: self.params[name].data for name in grads}
        updated, _ = adamw_step(arrays, grads, self.state)
        for name, value in updated.items():
            self.params[name].data = value
        return learning_rate(self.state, self.state.step_count)

    def state_dict(self) -> Dict[str, np.ndarray]:
        out = {}
        for name, m in self.state.first_moment.items():
            out[f"optim.m.{name}"] = m
            out[f"optim.v.{name}"] = self.state.second_moment[name]
        return out

    def load_state_dict(self, arrays: Dict[str, np.ndarray], step_count: int) -> None:
        self.state.step_count = step_count
        self.state.first_moment.clear()
        self.state.second_moment.clear()
        for key, value in arrays.items():
            if key.startswith("optim.m."):
                name = key[len("optim.m."):]
                dtype = self.params[name].data.dtype if name in self.params else value.dtype
                self.state.first_moment[name] = np.asarray(value, dtype=dtype)
                self.state.second_moment[name] = np.asarray(arrays[f"optim.v.{name}"], dtype=dtype)
