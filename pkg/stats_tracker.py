"""Statistics tracking for training runs."""
import time
from collections import Counter, defaultdict
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional

LOSS_COLUMNS = ["step", "l_gen", "l_sem", "l_str", "l_emo", "total", "lr"]


def format_duration(seconds: float) -> str:
    if seconds < 60:
        return f"{seconds:.1f}s"
    minutes, secs = divmod(int(seconds), 60)
    if minutes < 60:
        return f"{minutes}m {secs}s"
    hours, minutes = divmod(minutes, 60)
    return f"{hours}h {minutes}m"


class TrainingStats:
    """Per-step losses, learning rate, dev losses and stage timings of one run."""

    def __init__(self):
        self.started = time.perf_counter()
        self.trace: List[Dict[str, float]] = []
        self.dev_losses: List[Dict[str, float]] = []
        self.examples_seen = 0
        self.grad_norms: List[float] = []
        self.clipped_steps = 0
        self.errors: Counter = Counter()
        self.aborted_at: Optional[int] = None
        self.stage_times: Dict[str, float] = defaultdict(float)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Time a block; time accumulates across repeats of the same stage."""
        begin = time.perf_counter()
        try:
            yield
        finally:
            self.stage_times[name] += time.perf_counter() - begin

    def record_step(self, step: int, components: Dict[str, float], total: float, lr: float,
                    grad_norm: float, clipped: bool, batch_size: int):
        self.trace.append({
            "step": step,
            "l_gen": components["gen"],
            "l_sem": components["sem"],
            "l_str": components["str"],
            "l_emo": components["emo"],
            "total": total,
            "lr": lr,
        })
        self.grad_norms.append(grad_norm)
        self.clipped_steps += int(clipped)
        self.examples_seen += batch_size

    def record_dev(self, step: int, loss: float):
        self.dev_losses.append({"step": step, "dev_loss": loss})

    def record_error(self, error_type: str):
        self.errors[error_type] += 1

    def record_abort(self, step: int):
        self.aborted_at = step

    def moving_average(self, window: int = 10, column: str = "total") -> List[float]:
        values = [row[column] for row in self.trace]
        averages = []
        for i in range(len(values)):
            chunk = values[max(0, i - window + 1):i + 1]
            averages.append(sum(chunk) / len(chunk))
        return averages

    def get_summary(self) -> Dict[str, Any]:
        elapsed = time.perf_counter() - self.started
        last = self.trace[-1] if self.trace else {}
        return {
            "elapsed_seconds": round(elapsed, 2),
            "elapsed": format_duration(elapsed),
            "steps": len(self.trace),
            "examples_seen": self.examples_seen,
            "first_loss": self.trace[0]["total"] if self.trace else None,
            "last_loss": last.get("total"),
            "last_components": {k: last[k] for k in ("l_gen", "l_sem", "l_str", "l_emo")} if last else {},
            "best_dev_loss": min((d["dev_loss"] for d in self.dev_losses), default=None),
            "clipped_steps": self.clipped_steps,
            "errors": dict(self.errors),
            "aborted_at": self.aborted_at,
            "stage_times": {name: round(seconds, 2) for name, seconds in self.stage_times.items()},
        }

    def print_summary(self):
        summary = self.get_summary()
        rule = "=" * 80

        print(f"\n{rule}\n📊 TRAINING SUMMARY\n{rule}")
        print(f"\n⏱️  Elapsed: {summary['elapsed']}")
        print(f"\n📝 Steps: {summary['steps']}  (examples seen: {summary['examples_seen']})")

        if summary["last_components"]:
            print(f"\n📉 Loss: {summary['first_loss']:.4f} -> {summary['last_loss']:.4f}")
            for name, value in summary["last_components"].items():
                print(f"   {name:8s} {value:.4f}")
        if summary["best_dev_loss"] is not None:
            print(f"\n🏅 Best dev loss: {summary['best_dev_loss']:.4f}")
        if summary["clipped_steps"]:
            print(f"\n✂️  Clipped steps: {summary['clipped_steps']}")

        if summary["errors"]:
            print("\n❌ Errors:")
            for name, count in sorted(summary["errors"].items()):
                print(f"   {name:20s} {count}")
        if summary["aborted_at"] is not None:
            print(f"\n🛑 Aborted at step {summary['aborted_at']}; last good checkpoint kept")

        if summary["stage_times"]:
            print("\n⚡ Time per stage:")
            for name, seconds in summary["stage_times"].items():
                print(f"   {name:25s} {seconds:6.2f}s")
        print(f"\n{rule}")
