"""Dialogues -> annotated, windowed examples."""
import logging
from typing import List, Optional

from corpus.cache import ExampleCache, cache_key, dataset_fingerprint
from corpus.dataset import Dialogue
from corpus.emotion_lexicon import assign_emotions
from corpus.keywords import annotate_keywords
from corpus.preprocessing import segment_dialogue
from corpus.vocab import Vocab, encode_dialogues
from corpus.windows import Example, build_examples

logger = logging.getLogger(__name__)


def annotate(dialogues: List[Dialogue], vocab: Vocab, k: int) -> None:
    """Tokenize, add TF-IDF keywords and fill missing seeker emotions, in place."""
    encode_dialogues(dialogues, vocab)
    annotate_keywords(dialogues, vocab, k)
    assign_emotions(dialogues)


def prepare_examples(dialogues: List[Dialogue], vocab: Vocab, k: int, w: int, seed: int,
                     segment_length: int = 10, split: str = "",
                     cache: Optional[ExampleCache] = None, require_labels: bool = True) -> List[Example]:
    """Segment, annotate and window `dialogues`; results are cached by content and settings."""
    key = cache_key(dataset_fingerprint(dialogues), seed, w, k, vocab.fingerprint, segment_length, require_labels)
    if cache is not None:
        cached = cache.get(key)
        if cached is not None:
            return cached

    segments = [s for d in dialogues for s in segment_dialogue(d, segment_length)]
    annotate(segments, vocab, k)
    examples = build_examples(segments, w, require_labels)
    logger.info(f"🧩 Built {len(examples)} {split or 'examples'} examples (w={w}, k={k})")

    if cache is not None:
        cache.put(key, examples, split)
    return examples
