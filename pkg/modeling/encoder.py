"""Context encoder: one CLS per utterance plus one for the upcoming response."""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import ContractError
from numerics.layers import Embedding, FeedForward, LayerNorm, Module, MultiHeadAttention, dropout
from numerics.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class ContextEncoding:
    token_states: Tensor        # [L, d]
    cls_states: Tensor          # [N+1, d]
    cls_positions: List[int]
    key_mask: np.ndarray        # [L] True for non-PAD positions


def flatten_context(utterances: Sequence[Sequence[int]], cls_id: int,
                    max_len: int) -> Tuple[List[int], List[int], int]:
    """[CLS] u1 [CLS] u2 ... [CLS] for the response; returns (ids, cls_positions, dropped).

    Oldest utterances are dropped until the sequence fits `max_len`.
    """
    utterances = [list(u) for u in utterances]
    dropped = 0
    while utterances and sum(len(u) + 1 for u in utterances) + 1 > max_len:
        utterances.pop(0)
        dropped += 1
    if not utterances:
        raise ContractError(f"No utterance fits in max_len={max_len}")
    if dropped:
        logger.warning(f"⚠️  Context truncated: dropped {dropped} oldest utterances to fit max_len={max_len}")

    ids, positions = [], []
    for utterance in utterances:
        positions.append(len(ids))
        ids.append(cls_id)
        ids.extend(utterance)
    positions.append(len(ids))
    ids.append(cls_id)
    return ids, positions, dropped


class EncoderLayer(Module):
    """Post-norm transformer block: self-attention then feed-forward."""

    def __init__(self, dim: int, heads: int, hidden: int, rng: np.random.Generator, dropout_rate: float = 0.0):
        self.attention = MultiHeadAttention(dim, heads, rng)
        self.attention_norm = LayerNorm(dim)
        self.ffn = FeedForward(dim, hidden, rng)
        self.ffn_norm = LayerNorm(dim)
        self.dropout_rate = dropout_rate
        self.rng = rng

    def forward(self, x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        attended = self.attention(x, x, x, mask)
        x = self.attention_norm(x + dropout(attended, self.dropout_rate, self.rng, self.training))
        return self.ffn_norm(x + dropout(self.ffn(x), self.dropout_rate, self.rng, self.training))


class Encoder(Module):
    def __init__(self, dim: int, layers: int, heads: int, hidden: int,
                 max_len: int, cls_id: int, pad_id: int, rng: np.random.Generator, dropout_rate: float = 0.0):
        self.position_embedding = Embedding(max_len, dim, rng)
        self.layers = [EncoderLayer(dim, heads, hidden, rng, dropout_rate) for _ in range(layers)]
        self.max_len = max_len
        self.cls_id = cls_id
        self.pad_id = pad_id

    def forward(self, ids: Sequence[int], token_embedding: Embedding) -> ContextEncoding:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 1 or ids.size == 0 or ids[0] != self.cls_id:
            raise ContractError("Encoder input must be a non-empty id sequence starting with CLS")
        if ids.size > self.max_len:
            raise ContractError(f"Encoder input of length {ids.size} exceeds max_len={self.max_len}")

        key_mask = ids != self.pad_id
        x = token_embedding(ids) + self.position_embedding(np.arange(ids.size))
        mask = np.broadcast_to(key_mask, (ids.size, ids.size))
        for layer in self.layers:
            x = layer(x, mask)

        positions = np.flatnonzero(ids == self.cls_id).tolist()
        return ContextEncoding(token_states=x, cls_states=x[positions], cls_positions=positions, key_mask=key_mask)


def encode_context(ids: Sequence[int], encoder: Encoder, token_embedding: Embedding) -> ContextEncoding:
    return encoder(ids, token_embedding)
