"""Dialogue segmentation and the seeded train/dev/test split."""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from corpus.dataset import Dialogue, SUPPORTER
from errors import ConfigError, ContractError

logger = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")


def segment_dialogue(dialogue: Dialogue, segment_length: int = 10) -> List[Dialogue]:
    """Cut a dialogue into consecutive, non-overlapping chunks of at most `segment_length` turns."""
    if segment_length < 1:
        raise ConfigError(f"segment_length must be positive, got {segment_length}")
    if 0 < len(dialogue) <= segment_length:
        return [dialogue]
    segments = []
    for n, start in enumerate(range(0, len(dialogue), segment_length)):
        chunk = dialogue.utterances[start:start + segment_length]
        segments.append(Dialogue(id=f"{dialogue.id}#{n}", utterances=list(chunk)))
    return segments


def split_sizes(total: int, ratio: Sequence[int]) -> Tuple[int, ...]:
    """Largest-remainder apportionment of `total` items; ties go to the earlier split."""
    if total < 0 or not ratio or any(r < 0 for r in ratio) or sum(ratio) == 0:
        raise ConfigError(f"Invalid split ratio {tuple(ratio)}")
    quotas = [total * r / sum(ratio) for r in ratio]
    sizes = [math.floor(q) for q in quotas]
    leftover = total - sum(sizes)
    order = sorted(range(len(ratio)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1
    return tuple(sizes)


def truncate_and_split(dialogues: List[Dialogue], seed: int, segment_length: int = 10,
                       ratio: Sequence[int] = (8, 1, 1)) -> Dict[str, List[Dialogue]]:
    """Segment every dialogue, shuffle the segments with `seed` and split them by `ratio`."""
    if not dialogues:
        raise ContractError("truncate_and_split needs at least one dialogue")
    if len(ratio) != len(SPLITS):
        raise ConfigError(f"Split ratio needs {len(SPLITS)} parts, got {tuple(ratio)}")

    segments = [s for d in dialogues for s in segment_dialogue(d, segment_length)]
    order = np.random.default_rng(seed).permutation(len(segments))
    sizes = split_sizes(len(segments), ratio)

    result, offset = {}, 0
    for name, size in zip(SPLITS, sizes):
        result[name] = [segments[i] for i in order[offset:offset + size]]
        offset += size

    logger.info(
        f"✂️  {len(dialogues)} dialogues -> {len(segments)} segments "
        f"(train {sizes[0]} / dev {sizes[1]} / test {sizes[2]})"
    )
    return result


def align_target(segment: Dialogue) -> Optional[Dialogue]:
    """Drop trailing seeker turns so the segment ends on a supporter response.

    Returns None when no supporter turn with at least one preceding utterance
    remains.
    """
    utterances = list(segment.utterances)
    while utterances and utterances[-1].speaker != SUPPORTER:
        utterances.pop()
    if len(utterances) < 2:
        return None
    return Dialogue(id=segment.id, utterances=utterances)
