"""SQLite-backed cache of preprocessed examples."""
import hashlib
import json
import logging
from typing import List, Optional

from config import settings
from corpus.dataset import Dialogue
from corpus.windows import Example
from database import get_db, init_db
from models import Cache

logger = logging.getLogger(__name__)


def dataset_fingerprint(dialogues: List[Dialogue]) -> str:
    records = [[d.id, [u.to_dict() for u in d.utterances]] for d in dialogues]
    return hashlib.sha256(json.dumps(records, sort_keys=True).encode("utf-8")).hexdigest()


def cache_key(dataset_hash: str, seed: int, w: int, k: int, vocab_hash: str, segment_length: int = 10,
              require_labels: bool = True) -> str:
    payload = json.dumps([dataset_hash, seed, w, k, vocab_hash, segment_length, require_labels])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ExampleCache:
    """Stores windowed examples as JSON rows in the `cache` table."""

    def __init__(self, enabled: Optional[bool] = None):
        self.enabled = settings.cache_enabled if enabled is None else enabled
        if self.enabled:
            init_db()

    def get(self, key: str) -> Optional[List[Example]]:
        if not self.enabled:
            return None
        with get_db() as db:
            row = db.query(Cache).filter(Cache.cache_key == key).first()
            if row is None:
                return None
            records = json.loads(row.value)
        logger.info(f"♻️  Cache hit: {len(records)} examples ({key[:12]})")
        return [Example.from_dict(r) for r in records]

    def put(self, key: str, examples: List[Example], split: str = "") -> None:
        if not self.enabled:
            return
        value = json.dumps([e.to_dict() for e in examples])
        with get_db() as db:
            row = db.query(Cache).filter(Cache.cache_key == key).first()
            if row is None:
                row = Cache(cache_key=key)
                db.add(row)
            row.split = split
            row.value = value
            row.example_count = len(examples)
        logger.debug(f"Cached {len(examples)} examples under {key[:12]}")
