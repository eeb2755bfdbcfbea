"""Knowledge providers: zeros, learned label embeddings, precomputed vectors."""
import logging
from pathlib import Path
from typing import Dict

import numpy as np

from corpus.dataset import EMOTION_INDEX, STRATEGY_INDEX
from corpus.windows import Example
from errors import ConfigError, DataError
from numerics.layers import Embedding
from numerics.tensor import Tensor
from providers.base import XREACT, KnowledgeProvider

logger = logging.getLogger(__name__)


class ZeroKnowledge(KnowledgeProvider):
    def __init__(self, dim: int):
        super().__init__("zeros", dim)

    def lookup(self, example: Example, index: int, relation: str) -> Tensor:
        return self.zeros()


class LabelKnowledge(KnowledgeProvider):
    """xReact = E[emotion of the seeker turn]; oReact = E[strategy of the supporter turn]."""

    def __init__(self, dim: int, rng: np.random.Generator):
        super().__init__("label", dim)
        self.emotion = Embedding(len(EMOTION_INDEX), dim, rng)
        self.strategy = Embedding(len(STRATEGY_INDEX), dim, rng)

    def lookup(self, example: Example, index: int, relation: str) -> Tensor:
        utterance = example.history[index]
        if relation == XREACT:
            if utterance.emotion is None:
                raise DataError(f"{example.dialogue_id}: seeker turn {index} has no emotion label")
            return self.emotion(EMOTION_INDEX[utterance.emotion])
        if utterance.strategy is None:
            return self.zeros()
        return self.strategy(STRATEGY_INDEX[utterance.strategy])


class PrecomputedKnowledge(KnowledgeProvider):
    """Vectors read from an .npz archive keyed "{dialogue_id}:{index}:{relation}"."""

    def __init__(self, dim: int, path: str):
        super().__init__("precomputed", dim)
        if not Path(path).exists():
            raise ConfigError(f"Knowledge file not found: {path}")
        with np.load(path) as archive:
            self.vectors: Dict[str, np.ndarray] = {key: archive[key] for key in archive.files}
        for key, value in self.vectors.items():
            if value.shape != (dim,):
                raise ConfigError(f"Knowledge vector {key} has shape {value.shape}, model dimension is {dim}")
        self.misses = 0
        logger.info(f"📦 Loaded {len(self.vectors)} knowledge vectors from {path}")

    def lookup(self, example: Example, index: int, relation: str) -> Tensor:
        value = self.vectors.get(f"{example.dialogue_id}:{index}:{relation}")
        if value is None:
            self.misses += 1
            if self.misses == 1:
                logger.warning(f"⚠️  No {relation} vector for {example.dialogue_id}:{index}; using zeros")
            return self.zeros()
        return Tensor(value)


def build_provider(kind: str, dim: int, rng: np.random.Generator, path: str = None) -> KnowledgeProvider:
    if kind == "zeros":
        return ZeroKnowledge(dim)
    if kind == "label":
        return LabelKnowledge(dim, rng)
    if kind == "precomputed":
        if not path:
            raise ConfigError("The precomputed knowledge provider needs a path")
        return PrecomputedKnowledge(dim, path)
    raise ConfigError(f"Unknown knowledge provider: {kind}. Must be zeros, label or precomputed")
