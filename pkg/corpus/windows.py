"""Transition windows and training examples."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple

import numpy as np

from corpus.dataset import Dialogue, SEEKER, SUPPORTER, Utterance
from corpus.preprocessing import align_target
from errors import ConfigError, ContractError, DataError

logger = logging.getLogger(__name__)


@dataclass
class TransitionWindow:
    start_index: int
    end_index: int
    node_turns: List[Tuple[int, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.node_turns)

    @property
    def history_turns(self) -> List[Tuple[int, str]]:
        """Window nodes without the response placeholder."""
        return self.node_turns[:-1]


def window_start(speakers: List[str], w: int) -> int:
    """Index of the w-th latest supporter turn among `speakers`, or 0."""
    if w < 1:
        raise ConfigError(f"Window size must be at least 1, got {w}")
    supporter_turns = [i for i, s in enumerate(speakers) if s == SUPPORTER]
    if len(supporter_turns) < w:
        return 0
    return supporter_turns[-w]


def make_window(dialogue: Dialogue, w: int) -> TransitionWindow:
    """Window over `dialogue`, whose last utterance is the supporter response placeholder."""
    if not dialogue.utterances or dialogue.utterances[-1].speaker != SUPPORTER:
        raise ContractError(f"Dialogue {dialogue.id} does not end with a supporter response")
    end = len(dialogue) - 1
    history_speakers = [u.speaker for u in dialogue.utterances[:end]]
    start = window_start(history_speakers, w)
    turns = [(i, history_speakers[i]) for i in range(start, end)]
    turns.append((end, SUPPORTER))
    return TransitionWindow(start_index=start, end_index=end, node_turns=turns)


@dataclass
class Example:
    """One training pair: dialogue history, gold supporter response and its window."""
    dialogue_id: str
    history: List[Utterance]
    target: Utterance
    window: TransitionWindow

    def check_labels(self) -> None:
        if self.target.strategy is None:
            raise DataError(f"{self.dialogue_id}: response has no strategy label")
        for index, speaker in self.window.history_turns:
            u = self.history[index]
            if speaker == SUPPORTER and u.strategy is None:
                raise DataError(f"{self.dialogue_id}: supporter turn {index} has no strategy label")
            if speaker == SEEKER and u.emotion is None:
                raise DataError(f"{self.dialogue_id}: seeker turn {index} has no emotion label")

    def to_dict(self) -> Dict:
        return {
            "dialogue_id": self.dialogue_id,
            "utterances": [_utterance_record(u) for u in self.history + [self.target]],
            "window": {"start": self.window.start_index, "end": self.window.end_index,
                       "turns": [list(t) for t in self.window.node_turns]},
        }

    @classmethod
    def from_dict(cls, record: Dict) -> "Example":
        utterances = [Utterance(**u) for u in record["utterances"]]
        window = TransitionWindow(
            start_index=record["window"]["start"],
            end_index=record["window"]["end"],
            node_turns=[(int(i), s) for i, s in record["window"]["turns"]],
        )
        return cls(record["dialogue_id"], utterances[:-1], utterances[-1], window)


def _utterance_record(u: Utterance) -> Dict:
    return {"speaker": u.speaker, "text": u.text, "tokens": list(u.tokens),
            "keywords": list(u.keywords), "strategy": u.strategy, "emotion": u.emotion}


def build_examples(segments: List[Dialogue], w: int, require_labels: bool = True) -> List[Example]:
    """Align each segment to its last supporter turn and window it."""
    examples, skipped = [], 0
    for segment in segments:
        dialogue = align_target(segment)
        if dialogue is None:
            skipped += 1
            continue
        example = Example(
            dialogue_id=dialogue.id,
            history=dialogue.utterances[:-1],
            target=dialogue.utterances[-1],
            window=make_window(dialogue, w),
        )
        if require_labels:
            example.check_labels()
        examples.append(example)
    if skipped:
        logger.warning(f"⚠️  Skipped {skipped} segments without a supporter response")
    return examples


def context_example(history: List[Utterance], w: int, dialogue_id: str = "context") -> Example:
    """Example for inference: the response is an empty supporter placeholder."""
    placeholder = Utterance(speaker=SUPPORTER, text="")
    window = make_window(Dialogue(id=dialogue_id, utterances=history + [placeholder]), w)
    return Example(dialogue_id, list(history), placeholder, window)


def iterate_batches(examples: List[Example], batch_size: int, seed: int,
                    epoch: int) -> Iterator[List[Example]]:
    """Shuffle with a stream seeded from (seed, epoch) and yield batches."""
    if batch_size < 1:
        raise ConfigError(f"batch_size must be positive, got {batch_size}")
    if not examples:
        raise ContractError("Cannot batch an empty dataset")
    order = np.random.default_rng([seed, epoch]).permutation(len(examples))
    for start in range(0, len(order), batch_size):
        yield [examples[i] for i in order[start:start + batch_size]]
