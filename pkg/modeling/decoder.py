"""Transition-aware decoder.

Token embeddings are gated with the predicted strategy state, the encoder
memory is gated with cross-attended emotion states, and decoder outputs are
gated with the semantics delta before projecting onto the vocabulary.
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from errors import ContractError
from numerics import tensor as T
from numerics.layers import (
    Embedding, FeedForward, GatedFusion, LayerNorm, Linear, Module, MultiHeadAttention, Parameter, dropout,
)
from numerics.losses import cross_entropy
from numerics.tensor import Tensor


@dataclass
class DecoderInputs:
    target_embeddings: Tensor          # [M, d]
    strat_hat: Optional[Tensor]        # [d], placeholder strategy state
    memory: Tensor                     # [L, d], encoder token states
    memory_mask: np.ndarray            # [L], True for non-PAD
    emo_sequence: Optional[Tensor]     # [n_emo, d]
    sem_delta: Optional[Tensor]        # [d], placeholder semantics delta


def causal_mask(length: int) -> np.ndarray:
    return np.tril(np.ones((length, length), dtype=bool))


class DecoderLayer(Module):
    def __init__(self, dim: int, heads: int, hidden: int, rng: np.random.Generator, dropout_rate: float = 0.0):
        self.self_attention = MultiHeadAttention(dim, heads, rng)
        self.self_norm = LayerNorm(dim)
        self.cross_attention = MultiHeadAttention(dim, heads, rng)
        self.cross_norm = LayerNorm(dim)
        self.ffn = FeedForward(dim, hidden, rng)
        self.ffn_norm = LayerNorm(dim)
        self.dropout_rate = dropout_rate
        self.rng = rng

    def _drop(self, x: Tensor) -> Tensor:
        return dropout(x, self.dropout_rate, self.rng, self.training)

    def forward(self, x: Tensor, memory: Tensor, self_mask: np.ndarray, memory_mask: np.ndarray) -> Tensor:
        x = self.self_norm(x + self._drop(self.self_attention(x, x, x, self_mask)))
        x = self.cross_norm(x + self._drop(self.cross_attention(x, memory, memory, memory_mask)))
        return self.ffn_norm(x + self._drop(self.ffn(x)))


def fuse_strategy(target_embeddings: Tensor, strat_hat: Tensor, gate: GatedFusion) -> Tensor:
    """Ê = g*E + (1-g)*ŝt per position."""
    if strat_hat.shape[-1] != target_embeddings.shape[-1]:
        raise ContractError(f"Strategy state {strat_hat.shape} vs embeddings {target_embeddings.shape}")
    return gate(target_embeddings, strat_hat)


def fuse_emotion(memory: Tensor, emo_sequence: Optional[Tensor], attention: MultiHeadAttention,
                 gate: GatedFusion) -> Tensor:
    """Ĥ = g*H + (1-g)*CrossAtt(H, H_emo); memory passes through when there is no emotion state."""
    if emo_sequence is None or emo_sequence.shape[0] == 0:
        return memory
    attended = attention(memory, emo_sequence, emo_sequence)
    return gate(memory, attended)


class Decoder(Module):
    def __init__(self, dim: int, layers: int, heads: int, emotion_heads: int, hidden: int,
                 max_len: int, vocab_size: int, rng: np.random.Generator,
                 tie_output: bool = True, dropout_rate: float = 0.0):
        self.position_embedding = Embedding(max_len, dim, rng)
        self.layers = [DecoderLayer(dim, heads, hidden, rng, dropout_rate) for _ in range(layers)]
        self.strategy_gate = GatedFusion(dim, rng)
        self.emotion_attention = MultiHeadAttention(dim, emotion_heads, rng)
        self.emotion_gate = GatedFusion(dim, rng)
        self.semantics_gate = GatedFusion(dim, rng)
        self.output = None if tie_output else Linear(dim, vocab_size, rng, bias=False)
        self.output_bias = Parameter(np.zeros(vocab_size))
        self.max_len = max_len

    def embed(self, ids: Sequence[int], token_embedding: Embedding) -> Tensor:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size > self.max_len:
            raise ContractError(f"Decoder input of length {ids.size} exceeds max_target_len={self.max_len}")
        return token_embedding(ids) + self.position_embedding(np.arange(ids.size))

    def project(self, hidden: Tensor, token_embedding: Embedding) -> Tensor:
        if self.output is None:
            return T.matmul(hidden, T.transpose(token_embedding.weight, (1, 0))) + self.output_bias
        return self.output(hidden) + self.output_bias

    def forward(self, inputs: DecoderInputs, token_embedding: Embedding) -> Tensor:
        embeddings = inputs.target_embeddings
        if inputs.strat_hat is not None:
            embeddings = fuse_strategy(embeddings, inputs.strat_hat, self.strategy_gate)
        memory = fuse_emotion(inputs.memory, inputs.emo_sequence, self.emotion_attention, self.emotion_gate)
        return decode_tokens(embeddings, memory, inputs.memory_mask, inputs.sem_delta, self, token_embedding)


def decode_tokens(fused_embeddings: Tensor, fused_memory: Tensor, memory_mask: np.ndarray,
                  sem_delta: Optional[Tensor], decoder: Decoder, token_embedding: Embedding) -> Tensor:
    """Causal decoding, semantics-delta gate, vocabulary logits [M, |V|]."""
    length = fused_embeddings.shape[0]
    self_mask = causal_mask(length)
    cross_mask = np.broadcast_to(np.asarray(memory_mask, dtype=bool), (length, fused_memory.shape[0]))
    h = fused_embeddings
    for layer in decoder.layers:
        h = layer(h, fused_memory, self_mask, cross_mask)
    if sem_delta is not None:
        h = decoder.semantics_gate(h, sem_delta)
    return decoder.project(h, token_embedding)


def generation_loss(logits: Tensor, gold_tokens: Sequence[int], pad_id: Optional[int] = None) -> Tensor:
    """Mean NLL of the gold next tokens, PAD positions excluded."""
    gold_tokens = list(gold_tokens)
    if logits.shape[0] != len(gold_tokens):
        raise ContractError(f"{logits.shape[0]} logit rows for {len(gold_tokens)} gold tokens")
    return cross_entropy(logits, gold_tokens, ignore_index=pad_id)
