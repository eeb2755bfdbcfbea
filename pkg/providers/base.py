"""Base class for per-utterance knowledge vectors."""
import logging

import numpy as np

from corpus.windows import Example
from errors import ConfigError
from numerics.layers import Module
from numerics.tensor import Tensor

logger = logging.getLogger(__name__)

XREACT = "xReact"  # seeker's own reaction, added to emotion states
OREACT = "oReact"  # effect of a supporter turn on the seeker


class KnowledgeProvider(Module):
    """Supplies a [dim] vector for (example, utterance index, relation).

    Subclasses that own parameters are trained with the model.
    """

    relations = (XREACT, OREACT)

    def __init__(self, name: str, dim: int):
        self.name = name
        self.dim = dim

    def lookup(self, example: Example, index: int, relation: str) -> Tensor:
        raise NotImplementedError

    def __call__(self, example: Example, index: int, relation: str) -> Tensor:
        if relation not in self.relations:
            raise ConfigError(f"Unknown knowledge relation: {relation}. Must be one of {self.relations}")
        vector = self.lookup(example, index, relation)
        if vector.shape != (self.dim,):
            raise ConfigError(
                f"{self.name} knowledge vector has shape {vector.shape}, model dimension is {self.dim}"
            )
        return vector

    def zeros(self) -> Tensor:
        return Tensor(np.zeros(self.dim))
