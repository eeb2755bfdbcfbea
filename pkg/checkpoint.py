"""Checkpoint files and run-directory checkpoint management.

A checkpoint is a single binary file:

    MAGIC | uint32 manifest length | manifest JSON | float32 payload

The manifest maps each array name to its shape and element offset; the
payload is little-endian float32. A JSON sidecar (same stem, `.json`) holds
the run config, step counters and the vocabulary file name.
"""
import json
import logging
import struct
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from errors import ParseError, TurnStateError

logger = logging.getLogger(__name__)

MAGIC = b"TSCKPT01"
_PAYLOAD_DTYPE = np.dtype("<f4")


def write_checkpoint(path, arrays: Dict[str, np.ndarray], sidecar: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    manifest, offset = {}, 0
    for name in sorted(arrays):
        value = np.asarray(arrays[name])
        manifest[name] = {"shape": list(value.shape), "offset": offset}
        offset += int(value.size)
    header = json.dumps(manifest).encode("utf-8")

    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for name in sorted(arrays):
            f.write(np.ascontiguousarray(arrays[name], dtype=_PAYLOAD_DTYPE).tobytes())
    tmp.replace(path)

    if sidecar is not None:
        sidecar_path(path).write_text(json.dumps(sidecar, indent=2), encoding="utf-8")
    return path


def read_checkpoint(path) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Returns (arrays, sidecar); the sidecar is empty when missing."""
    path = Path(path)
    blob = path.read_bytes()
    if not blob.startswith(MAGIC):
        raise ParseError(f"{path} is not a checkpoint file")
    start = len(MAGIC)
    if len(blob) < start + 4:
        raise ParseError(f"Checkpoint {path} is truncated")
    (header_len,) = struct.unpack("<I", blob[start:start + 4])
    start += 4
    try:
        manifest = json.loads(blob[start:start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"Corrupt checkpoint manifest in {path}: {e}") from e
    payload = np.frombuffer(blob, dtype=_PAYLOAD_DTYPE, offset=start + header_len)

    arrays = {}
    for name, entry in manifest.items():
        size = int(np.prod(entry["shape"], dtype=np.int64))
        chunk = payload[entry["offset"]:entry["offset"] + size]
        if chunk.size != size:
            raise ParseError(f"Checkpoint {path} is truncated at {name}")
        arrays[name] = chunk.reshape(entry["shape"]).copy()

    meta_path = sidecar_path(path)
    sidecar = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    return arrays, sidecar


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


class CheckpointManager:
    """Save, list, load and prune `step-NNNNNN.ckpt` files in a run directory."""

    PATTERN = "step-*.ckpt"

    def __init__(self, run_dir, keep: int = 3):
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.keep = keep

    def path_for(self, step: int) -> Path:
        return self.run_dir / f"step-{step:06d}.ckpt"

    @property
    def best_path(self) -> Path:
        return self.run_dir / "best.ckpt"

    def save_checkpoint(self, step: int, arrays: Dict[str, np.ndarray], meta: Dict[str, Any],
                        best: bool = False) -> Path:
        """Write a checkpoint after `step`; `best` also refreshes best.ckpt."""
        meta = dict(meta, step=step, saved_at=datetime.now(timezone.utc).isoformat())
        path = write_checkpoint(self.path_for(step), arrays, meta)
        if best:
            write_checkpoint(self.best_path, arrays, meta)
        self.prune()
        logger.info(f"✅ Saved checkpoint {path.name}{' (best)' if best else ''}")
        return path

    def list_checkpoints(self) -> List[Path]:
        return sorted(self.run_dir.glob(self.PATTERN))

    def latest(self) -> Optional[Path]:
        checkpoints = self.list_checkpoints()
        return checkpoints[-1] if checkpoints else None

    def get_checkpoint(self, path=None) -> Optional[Tuple[Dict[str, np.ndarray], Dict[str, Any]]]:
        path = Path(path) if path else self.latest()
        if path is None or not path.exists():
            return None
        return read_checkpoint(path)

    def can_resume(self) -> bool:
        return self.latest() is not None

    def prune(self) -> None:
        """Keep only the newest `keep` step checkpoints."""
        if self.keep <= 0:
            return
        for old in self.list_checkpoints()[:-self.keep]:
            old.unlink(missing_ok=True)
            sidecar_path(old).unlink(missing_ok=True)

    def clear(self) -> None:
        for path in self.list_checkpoints() + [self.best_path]:
            path.unlink(missing_ok=True)
            sidecar_path(path).unlink(missing_ok=True)

    def print_status(self) -> None:
        latest = self.latest()
        if latest is None:
            print("No checkpoint found - starting from beginning")
            return
        meta = json.loads(sidecar_path(latest).read_text(encoding="utf-8")) if sidecar_path(latest).exists() else {}
        print(f"📌 Last checkpoint: {latest.name} (step {meta.get('step', '?')}) at {meta.get('saved_at', '?')}")
        if self.best_path.exists():
            print(f"🏅 Best dev loss: {meta.get('best_dev_loss')}")


def resolve_checkpoint(path) -> Path:
    """A checkpoint file, or for a run directory its best (else latest) checkpoint."""
    path = Path(path)
    if path.is_dir():
        manager = CheckpointManager(path)
        found = manager.best_path if manager.best_path.exists() else manager.latest()
        if found is None:
            raise TurnStateError(f"No checkpoint in {path}")
        path = found
    if not path.exists():
        raise TurnStateError(f"Checkpoint not found: {path}")
    return path


def require_checkpoint(path) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    return read_checkpoint(resolve_checkpoint(path))
