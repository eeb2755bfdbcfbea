"""Turn-level supervision heads: keyword bag-of-words, strategy and emotion."""
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from corpus.dataset import EMOTION_INDEX, EMOTIONS, STRATEGIES, STRATEGY_INDEX
from errors import ConfigError, DataError
from numerics import tensor as T
from numerics.layers import Linear, Module
from numerics.losses import cross_entropy
from numerics.tensor import Tensor


@dataclass
class StateDeltas:
    delta: Tensor  # [n_nodes, d], post-update minus initial semantics states


@dataclass
class HeadOutputs:
    keyword_logits: Tensor            # [n_nodes, |V|]
    strategy_logits: Optional[Tensor]  # [n_supporter_nodes, 8]
    emotion_logits: Optional[Tensor]   # [n_seeker_nodes, 6]


def semantics_deltas(initial: Tensor, updated: Tensor) -> StateDeltas:
    return StateDeltas(delta=updated - initial)


class Heads(Module):
    def __init__(self, dim: int, vocab_size: int, rng: np.random.Generator):
        self.keyword = Linear(dim, vocab_size, rng)
        self.strategy = Linear(dim, len(STRATEGIES), rng)
        self.emotion = Linear(dim, len(EMOTIONS), rng)

    def forward(self, deltas: StateDeltas, strat_states: Optional[Tensor],
                emo_states: Optional[Tensor]) -> HeadOutputs:
        return HeadOutputs(
            keyword_logits=self.keyword(deltas.delta),
            strategy_logits=self.strategy(strat_states) if strat_states is not None else None,
            emotion_logits=self.emotion(emo_states) if emo_states is not None else None,
        )


def bow_keyword_loss(keyword_logits: Tensor, keyword_sets: Sequence[Sequence[int]],
                     normalize: str = "node") -> Tensor:
    """-sum log softmax(logits_i)[k] over each node's keywords.

    normalize="node": per-node sums averaged over nodes with keywords;
    normalize="keyword": averaged over every listed keyword. Nodes with an
    empty keyword set do not count.
    """
    n_nodes, vocab_size = keyword_logits.shape
    if len(keyword_sets) != n_nodes:
        raise DataError(f"{len(keyword_sets)} keyword sets for {n_nodes} nodes")
    if normalize not in ("node", "keyword"):
        raise ConfigError(f"Unknown BoW normalization: {normalize}. Must be node or keyword")

    rows, cols = [], []
    for i, keywords in enumerate(keyword_sets):
        for k in keywords:
            if not 0 <= k < vocab_size:
                raise DataError(f"Keyword id {k} outside vocabulary of size {vocab_size}")
            rows.append(i)
            cols.append(k)
    if not rows:
        return Tensor(0.0)

    log_probs = T.log_softmax(keyword_logits, axis=-1)
    total = -T.tensor_sum(log_probs[np.asarray(rows), np.asarray(cols)])
    denominator = len(set(rows)) if normalize == "node" else len(rows)
    return total / float(denominator)


def _label_ids(labels: Sequence[Optional[str]], index: dict, kind: str) -> List[int]:
    ids = []
    for position, label in enumerate(labels):
        if label is None:
            raise DataError(f"Missing gold {kind} label for supervised node {position}")
        if label not in index:
            raise DataError(f"Unknown {kind} label: {label}")
        ids.append(index[label])
    return ids


def predict_strategy(strat_state: Tensor, heads: Heads) -> np.ndarray:
    """Distribution over the 8 strategies for one supporter state."""
    return T.softmax(heads.strategy(strat_state), axis=-1).data


def strategy_loss(logits: Tensor, golds: Sequence[Optional[str]]) -> Tensor:
    """Mean cross-entropy over supervised supporter nodes."""
    return cross_entropy(logits, _label_ids(golds, STRATEGY_INDEX, "strategy"))


def predict_emotion(emo_state: Tensor, heads: Heads) -> np.ndarray:
    return T.softmax(heads.emotion(emo_state), axis=-1).data


def emotion_loss(logits: Tensor, golds: Sequence[Optional[str]]) -> Tensor:
    return cross_entropy(logits, _label_ids(golds, EMOTION_INDEX, "emotion"))
