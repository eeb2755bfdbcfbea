"""CSV export of training traces."""
from pathlib import Path
from typing import Dict, List

import pandas as pd

from stats_tracker import LOSS_COLUMNS


class CSVExporter:
    """Write per-step loss traces as `step,l_gen,l_sem,l_str,l_emo,total,lr`."""

    def export_losses(self, trace: List[Dict[str, float]], filepath, append: bool = False) -> int:
        """Write the trace; with `append`, only steps past the file's last row are added."""
        path = Path(filepath)
        frame = pd.DataFrame(trace, columns=LOSS_COLUMNS)
        if append and path.exists() and path.stat().st_size > 0:
            existing = pd.read_csv(path)
            if len(existing):
                frame = frame[frame["step"] > existing["step"].max()]
            frame.to_csv(path, mode="a", header=False, index=False)
        else:
            frame.to_csv(path, index=False)

        print(f"✓ Exported {len(frame)} loss rows to {path}")
        return len(frame)

    def export_dev_losses(self, dev_losses: List[Dict[str, float]], filepath) -> None:
        if not dev_losses:
            print("No dev evaluations to export")
            return
        pd.DataFrame(dev_losses, columns=["step", "dev_loss"]).to_csv(filepath, index=False)
        print(f"✓ Exported {len(dev_losses)} dev evaluations to {filepath}")
