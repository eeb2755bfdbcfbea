"""Dialogue records, label taxonomies and ESConv-format I/O."""
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

SEEKER = "seeker"
SUPPORTER = "supporter"
SPEAKERS = (SEEKER, SUPPORTER)

STRATEGIES = (
    "question",
    "restatement_or_paraphrasing",
    "reflection_of_feelings",
    "self_disclosure",
    "affirmation_and_reassurance",
    "providing_suggestions",
    "information",
    "others",
)

EMOTIONS = ("joy", "anger", "sadness", "fear", "disgust", "neutral")

STRATEGY_INDEX = {name: i for i, name in enumerate(STRATEGIES)}
EMOTION_INDEX = {name: i for i, name in enumerate(EMOTIONS)}

_SPEAKER_ALIASES = {"seeker": SEEKER, "usr": SEEKER, "user": SEEKER,
                    "supporter": SUPPORTER, "sys": SUPPORTER, "system": SUPPORTER}


def canonical_label(raw: str) -> str:
    """'Restatement or Paraphrasing' -> 'restatement_or_paraphrasing'."""
    return re.sub(r"[^a-z0-9]+", "_", raw.strip().lower()).strip("_")


@dataclass
class Utterance:
    speaker: str
    text: str
    tokens: List[int] = field(default_factory=list)
    keywords: List[int] = field(default_factory=list)
    strategy: Optional[str] = None
    emotion: Optional[str] = None

    def __post_init__(self):
        if self.speaker not in SPEAKERS:
            raise ValidationError(f"Unknown speaker: {self.speaker!r}")
        if self.strategy is not None:
            if self.speaker != SUPPORTER:
                raise ValidationError(f"Strategy {self.strategy!r} on a {self.speaker} turn")
            if self.strategy not in STRATEGY_INDEX:
                raise ValidationError(f"Unknown strategy label: {self.strategy!r}")
        if self.emotion is not None:
            if self.speaker != SEEKER:
                raise ValidationError(f"Emotion {self.emotion!r} on a {self.speaker} turn")
            if self.emotion not in EMOTION_INDEX:
                raise ValidationError(f"Unknown emotion label: {self.emotion!r}")

    def to_dict(self, keyword_words: Optional[List[str]] = None) -> Dict:
        record = {"speaker": self.speaker, "text": self.text}
        if self.strategy:
            record["strategy"] = self.strategy
        if self.emotion:
            record["emotion"] = self.emotion
        if keyword_words is not None:
            record["keywords"] = keyword_words
        return record


@dataclass
class Dialogue:
    id: str
    utterances: List[Utterance]

    def __len__(self) -> int:
        return len(self.utterances)


def parse_utterance(record: Dict, where: str) -> Utterance:
    if not isinstance(record, dict):
        raise ValidationError(f"{where}: utterance must be an object")
    raw_speaker = str(record.get("speaker", "")).strip().lower()
    if raw_speaker not in _SPEAKER_ALIASES:
        raise ValidationError(f"{where}: unknown speaker {record.get('speaker')!r}")
    text = record.get("text", record.get("content"))
    if not isinstance(text, str):
        raise ValidationError(f"{where}: missing utterance text")

    strategy = record.get("strategy")
    if strategy is None and isinstance(record.get("annotation"), dict):
        strategy = record["annotation"].get("strategy")
    emotion = record.get("emotion")
    try:
        return Utterance(
            speaker=_SPEAKER_ALIASES[raw_speaker],
            text=text.strip(),
            strategy=canonical_label(strategy) if strategy else None,
            emotion=canonical_label(emotion) if emotion else None,
        )
    except ValidationError as e:
        raise ValidationError(f"{where}: {e}") from e


def parse_dialogues(raw: List) -> List[Dialogue]:
    if not isinstance(raw, list):
        raise ValidationError("Dataset must be a JSON array of dialogues")
    dialogues = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise ValidationError(f"dialogue {i}: must be an object")
        turns = item.get("utterances", item.get("dialog"))
        if not isinstance(turns, list):
            raise ValidationError(f"dialogue {i}: missing utterance list")
        dialogue_id = str(item.get("id", i))
        utterances = [parse_utterance(t, f"dialogue {dialogue_id} turn {j}") for j, t in enumerate(turns)]
        dialogues.append(Dialogue(id=dialogue_id, utterances=utterances))
    return dialogues


def load_esconv(path) -> List[Dialogue]:
    """Parse an ESConv-format JSON file into validated dialogues."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"{path} is not valid UTF-8: {e.reason} at byte {e.start}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"Malformed JSON in {path}: {e.msg}", line=e.lineno) from e
    dialogues = parse_dialogues(raw)
    logger.info(f"📥 Loaded {len(dialogues)} dialogues from {path}")
    return dialogues


def save_dialogues(dialogues: List[Dialogue], path, vocab=None) -> None:
    """Write dialogues as JSON; keyword ids are stored as words when a vocab is given."""
    records = []
    for d in dialogues:
        utterances = []
        for u in d.utterances:
            words = vocab.words(u.keywords) if vocab is not None and u.keywords else None
            utterances.append(u.to_dict(words))
        records.append({"id": d.id, "utterances": utterances})
    Path(path).write_text(json.dumps(records, indent=1, ensure_ascii=False), encoding="utf-8")
    logger.info(f"✓ Wrote {len(records)} dialogues to {path}")


def dataset_statistics(dialogues: List[Dialogue]) -> Dict[str, float]:
    n = len(dialogues)
    turns = sum(len(d) for d in dialogues)
    words = sum(len(u.text.split()) for d in dialogues for u in d.utterances)
    return {
        "dialogues": n,
        "utterances": turns,
        "avg_turns_per_dialogue": round(turns / n, 2) if n else 0.0,
        "avg_words_per_utterance": round(words / turns, 2) if turns else 0.0,
    }
