"""JSON-lines export of generated responses."""
import json
from pathlib import Path
from typing import Dict, Iterable

GENERATION_FIELDS = ("dialogue_id", "context", "gold", "generated", "predicted_strategy", "gold_strategy")


def export_generations(records: Iterable[Dict], filepath) -> int:
    """One JSON object per line, keys in a fixed order."""
    count = 0
    with open(Path(filepath), "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps({key: record.get(key) for key in GENERATION_FIELDS}, ensure_ascii=False))
            f.write("\n")
            count += 1
    print(f"✓ Exported {count} generations to {filepath}")
    return count


def load_generations(filepath) -> list:
    with open(Path(filepath), encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
