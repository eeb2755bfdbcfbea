"""TF-IDF keyword annotation."""
import logging
from collections import Counter
from typing import List, Sequence

from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

from corpus.vocab import Vocab
from errors import ConfigError

logger = logging.getLogger(__name__)


def is_content_token(token: str) -> bool:
    return token not in ENGLISH_STOP_WORDS and any(ch.isalnum() for ch in token)


def tfidf_keywords(tokens: Sequence[int], vocab: Vocab, k: int) -> List[int]:
    """Top-k content tokens of one utterance by tf*idf, ties to the lower id.

    tf is the raw count over the utterance length; idf comes from the
    train-fitted vocabulary.
    """
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    if not tokens:
        return []
    counts = Counter(
        t for t in tokens
        if not vocab.is_special(t) and is_content_token(vocab.token(t))
    )
    length = len(tokens)
    ranked = sorted(counts, key=lambda t: (-(counts[t] / length) * vocab.idf_of(t), t))
    return ranked[:k]


def annotate_keywords(dialogues, vocab: Vocab, k: int) -> None:
    """Fill `Utterance.keywords` in place; tokens must already be encoded."""
    total = 0
    for dialogue in dialogues:
        for utterance in dialogue.utterances:
            utterance.keywords = tfidf_keywords(utterance.tokens, vocab, k)
            total += len(utterance.keywords)
    logger.info(f"🔑 Annotated {total} keywords (k={k})")
