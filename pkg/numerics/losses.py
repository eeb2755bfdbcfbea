"""Likelihood-based losses."""
from typing import Optional, Sequence

import numpy as np

from errors import ContractError, DataError
from numerics import tensor as T
from numerics.tensor import Tensor


def cross_entropy(logits: Tensor, targets: Sequence[int], ignore_index: Optional[int] = None) -> Tensor:
    """Mean negative log-likelihood of `targets` under softmax(`logits`) rows."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ContractError(f"cross_entropy: logits {logits.shape} vs targets {targets.shape}")
    keep = np.ones(len(targets), dtype=bool) if ignore_index is None else targets != ignore_index
    if not keep.any():
        raise ContractError("cross_entropy: every target is ignored")
    rows = np.flatnonzero(keep)
    cols = targets[keep]
    if cols.min() < 0 or cols.max() >= logits.shape[1]:
        raise DataError(f"cross_entropy: target id outside [0, {logits.shape[1]})")
    log_probs = T.log_softmax(logits, axis=-1)
    return -T.mean(log_probs[rows, cols])
