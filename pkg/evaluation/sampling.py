"""Next-token sampling: repetition penalty, temperature, top-k and nucleus filtering."""
from typing import Iterable, Tuple

import numpy as np

from config import GenerationConfig
from errors import ContractError


def apply_repetition_penalty(logits: np.ndarray, history_tokens: Iterable[int], penalty: float) -> np.ndarray:
    """Divide positive and multiply negative logits of tokens already seen."""
    logits = np.array(logits, dtype=np.float64)
    if penalty == 1.0:
        return logits
    seen = np.unique(np.asarray(list(history_tokens), dtype=np.int64))
    seen = seen[(seen >= 0) & (seen < logits.size)]
    values = logits[seen]
    logits[seen] = np.where(values > 0, values / penalty, values * penalty)
    return logits


def top_k_indices(logits: np.ndarray, k: int) -> np.ndarray:
    """Ids of the k largest logits; ties go to the lower id. k <= 0 keeps everything."""
    order = np.argsort(-logits, kind="stable")
    if k <= 0 or k >= logits.size:
        return order
    return order[:k]


def nucleus(candidates: np.ndarray, probs: np.ndarray, p: float) -> Tuple[np.ndarray, np.ndarray]:
    """Smallest prefix of `candidates` (sorted by probability) whose mass reaches p."""
    order = np.argsort(-probs, kind="stable")
    candidates, probs = candidates[order], probs[order]
    cumulative = np.cumsum(probs)
    size = int(np.searchsorted(cumulative, p - 1e-12, side="left")) + 1
    size = min(size, candidates.size)
    kept = probs[:size]
    return candidates[:size], kept / kept.sum()


def filter_logits(logits: np.ndarray, history_tokens: Iterable[int],
                  cfg: GenerationConfig) -> Tuple[np.ndarray, np.ndarray]:
    """(support ids, renormalized probabilities) after all filters."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1 or logits.size == 0:
        raise ContractError(f"Expected a 1-d logit vector, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise ContractError("Sampling logits must be finite")

    scaled = apply_repetition_penalty(logits, history_tokens, cfg.repetition_penalty) / cfg.temperature
    candidates = top_k_indices(scaled, cfg.top_k)
    kept = scaled[candidates]
    probs = np.exp(kept - kept.max())
    probs /= probs.sum()
    return nucleus(candidates, probs, cfg.top_p)


def sample_next(logits: np.ndarray, history_tokens: Iterable[int], cfg: GenerationConfig,
                rng: np.random.Generator) -> int:
    support, probs = filter_logits(logits, history_tokens, cfg)
    if support.size == 1:
        return int(support[0])
    return int(rng.choice(support, p=probs))
