"""Neural network layers built on `numerics.tensor`."""
import math
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from errors import ConfigError, ContractError, DimensionError
from numerics import tensor as T
from numerics.tensor import Tensor

MASK_VALUE = -1e9


class Parameter(Tensor):
    """A learned tensor; always requires gradients."""

    def __init__(self, data, name: Optional[str] = None):
        super().__init__(data, requires_grad=True, name=name)


class Module:
    """Container that discovers its parameters through attribute traversal."""

    training: bool = True

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + attr, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{attr}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{attr}.{i}.")
            elif isinstance(value, dict):
                for key in sorted(value):
                    if isinstance(value[key], Module):
                        yield from value[key].named_parameters(f"{prefix}{attr}.{key}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True) -> "Module":
        for module in self._modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def _modules(self) -> Iterator["Module"]:
        yield self
        for value in vars(self).values():
            children = value if isinstance(value, (list, tuple)) else (
                [value[k] for k in sorted(value)] if isinstance(value, dict) else [value])
            for child in children:
                if isinstance(child, Module):
                    yield from child._modules()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if strict and (missing or unexpected):
            raise ConfigError(f"State mismatch. Missing: {missing}; unexpected: {unexpected}")
        for name, p in params.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise DimensionError(f"Parameter {name}: checkpoint shape {value.shape} != model shape {p.shape}")
            p.data = value.astype(T.get_default_dtype())


def linear_forward(x: Tensor, W: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """y = xW + b over the last axis of x."""
    if x.shape[-1] != W.shape[0]:
        raise DimensionError(f"linear_forward: input shape {x.shape} incompatible with weight shape {W.shape}")
    if b is not None and b.shape != (W.shape[1],):
        raise DimensionError(f"linear_forward: bias shape {b.shape} incompatible with weight shape {W.shape}")
    y = T.matmul(x, W)
    return y + b if b is not None else y


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        limit = math.sqrt(6.0 / (in_dim + out_dim))
        self.weight = Parameter(rng.uniform(-limit, limit, size=(in_dim, out_dim)))
        self.bias = Parameter(np.zeros(out_dim)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return linear_forward(x, self.weight, self.bias)


class Embedding(Module):
    def __init__(self, num_embeddings: int, dim: int, rng: np.random.Generator):
        self.weight = Parameter(rng.normal(0.0, dim ** -0.5, size=(num_embeddings, dim)))

    def forward(self, ids) -> Tensor:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.weight.shape[0]):
            raise DimensionError(f"Embedding ids out of range [0, {self.weight.shape[0]})")
        return self.weight[ids]


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gain = Parameter(np.ones(dim))
        self.shift = Parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        centered = x - T.mean(x, axis=-1, keepdims=True)
        variance = T.mean(centered * centered, axis=-1, keepdims=True)
        return centered / T.sqrt(variance + self.eps) * self.gain + self.shift


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator], training: bool) -> Tensor:
    if rate <= 0.0 or not training or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * keep


class FeedForward(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        self.inner = Linear(dim, hidden, rng)
        self.outer = Linear(hidden, dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.outer(T.relu(self.inner(x)))


def additive_mask(mask: Optional[np.ndarray], shape: Tuple[int, int]) -> np.ndarray:
    """Boolean visibility matrix -> additive mask; fully hidden rows are a contract violation."""
    if mask is None:
        return np.zeros(shape, dtype=T.get_default_dtype())
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        raise DimensionError(f"Attention mask shape {mask.shape} does not match scores {shape}")
    if not mask.any(axis=-1).all():
        rows = np.flatnonzero(~mask.any(axis=-1)).tolist()
        raise ContractError(f"Attention query rows {rows} have no visible key")
    return np.where(mask, 0.0, MASK_VALUE).astype(T.get_default_dtype())


def scaled_dot_product_attention(q: Tensor, k: Tensor, v: Tensor,
                                 mask: Optional[np.ndarray] = None) -> Tuple[Tensor, Tensor]:
    """softmax(q kᵀ / √d + mask) v for [..., L, d] inputs; returns (output, weights)."""
    d = q.shape[-1]
    scores = T.matmul(q, T.transpose(k, tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2)))
    scores = scores / math.sqrt(d)
    scores = scores + additive_mask(mask, scores.shape[-2:])
    weights = T.softmax(scores, axis=-1)
    return T.matmul(weights, v), weights


class MultiHeadAttention(Module):
    """Multi-head attention with boolean visibility masks (True = visible)."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if heads < 1 or dim % heads != 0:
            raise ConfigError(f"Model dimension {dim} is not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng)
        self.value = Linear(dim, dim, rng)
        self.output = Linear(dim, dim, rng)

    def split_heads(self, x: Tensor) -> Tensor:
        """[L, d] -> [heads, L, d/heads]"""
        length = x.shape[0]
        return T.transpose(T.reshape(x, (length, self.heads, self.dim // self.heads)), (1, 0, 2))

    def merge_heads(self, x: Tensor) -> Tensor:
        """[heads, L, d/heads] -> [L, d]"""
        length = x.shape[1]
        return T.reshape(T.transpose(x, (1, 0, 2)), (length, self.dim))

    def forward(self, query: Tensor, key: Tensor, value: Tensor,
                mask: Optional[np.ndarray] = None) -> Tensor:
        for name, x in (("query", query), ("key", key), ("value", value)):
            if x.ndim != 2 or x.shape[-1] != self.dim:
                raise DimensionError(f"multi_head_attention: {name} shape {x.shape}, expected [L, {self.dim}]")
        if key.shape[0] != value.shape[0]:
            raise DimensionError(f"multi_head_attention: key shape {key.shape} vs value shape {value.shape}")
        q = self.split_heads(self.query(query))
        k = self.split_heads(self.key(key))
        v = self.split_heads(self.value(value))
        attended, _ = scaled_dot_product_attention(q, k, v, mask)
        return self.output(self.merge_heads(attended))


def multi_head_attention(q: Tensor, k: Tensor, v: Tensor, mask: Optional[np.ndarray],
                         attention: MultiHeadAttention) -> Tensor:
    return attention(q, k, v, mask)


class GatedFusion(Module):
    """out = g ⊙ a + (1 − g) ⊙ b with g = σ([a; b] W + c)."""

    def __init__(self, dim: int, rng: np.random.Generator):
        self.proj = Linear(2 * dim, dim, rng)

    def gate(self, a: Tensor, b: Tensor) -> Tensor:
        if b.shape != a.shape:
            b = T.broadcast_to(b, a.shape)
        return T.sigmoid(self.proj(T.concat([a, b], axis=-1)))

    def forward(self, a: Tensor, b: Tensor) -> Tensor:
        if b.shape != a.shape:
            b = T.broadcast_to(b, a.shape)
        g = self.gate(a, b)
        return g * a + (1.0 - g) * b
