"""Metric report for a trained model on a labelled split."""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from tabulate import tabulate

from config import GenerationConfig
from corpus.dataset import STRATEGIES, STRATEGY_INDEX
from corpus.vocab import Vocab
from corpus.windows import Example
from errors import ContractError
from evaluation.generation import Generation, generate_corpus, perplexity
from evaluation.metrics import corpus_bleu, corpus_rouge_l, distinct_n, top_n_accuracies
from modeling.model import TurnStateModel

logger = logging.getLogger(__name__)


@dataclass
class MetricReport:
    ppl: float
    b1: float
    b2: float
    b3: float
    b4: float
    rl: float
    d1: float
    d2: float
    acc: float
    acc_top_n: Dict[int, float] = field(default_factory=dict)
    count: int = 0
    window: Optional[int] = None

    def to_dict(self) -> Dict:
        record = asdict(self)
        record["acc_top_n"] = {str(n): v for n, v in self.acc_top_n.items()}
        return record

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")

    def table(self) -> str:
        rows = [["Acc", self.acc], ["PPL", self.ppl], ["D-1", self.d1], ["D-2", self.d2],
                ["B-1", self.b1], ["B-2", self.b2], ["B-3", self.b3], ["B-4", self.b4], ["R-L", self.rl]]
        rows = [[name, f"{value:.4f}" if name == "PPL" else f"{100 * value:.2f}"] for name, value in rows]
        table = tabulate(rows, headers=["metric", "value"], tablefmt="simple")
        if self.acc_top_n:
            top = tabulate([[n, f"{100 * v:.2f}"] for n, v in sorted(self.acc_top_n.items())],
                           headers=["top-n", "acc"], tablefmt="simple")
            table = f"{table}\n\n{top}"
        return table

    def print_report(self) -> None:
        print("\n" + "=" * 40)
        print(f"📊 EVALUATION ({self.count} examples)")
        print("=" * 40)
        print(self.table())


def response_words(tokens: List[int], vocab: Vocab) -> List[str]:
    """Words scored by BLEU and ROUGE; UNK stays in so OOV words still count."""
    return [vocab.token(i) for i in tokens if i == vocab.unk_id or not vocab.is_special(i)]


def build_report(examples: List[Example], generations: List[Generation], vocab: Vocab,
                 ppl: float, window: Optional[int] = None) -> MetricReport:
    if len(examples) != len(generations):
        raise ContractError(f"{len(generations)} generations for {len(examples)} examples")
    candidates = [response_words(g.tokens, vocab) for g in generations]
    references = [response_words(e.target.tokens, vocab) for e in examples]
    golds = [STRATEGY_INDEX[e.target.strategy] for e in examples]
    accuracies = top_n_accuracies([g.strategy_probs for g in generations], golds, len(STRATEGIES))
    return MetricReport(
        ppl=ppl,
        b1=corpus_bleu(candidates, references, 1),
        b2=corpus_bleu(candidates, references, 2),
        b3=corpus_bleu(candidates, references, 3),
        b4=corpus_bleu(candidates, references, 4),
        rl=corpus_rouge_l(candidates, references),
        d1=distinct_n(candidates, 1),
        d2=distinct_n(candidates, 2),
        acc=accuracies[0],
        acc_top_n={n: acc for n, acc in enumerate(accuracies, start=1)},
        count=len(examples),
        window=window,
    )


def evaluate_model(model: TurnStateModel, examples: List[Example], vocab: Vocab,
                   cfg: GenerationConfig, window: Optional[int] = None):
    """Returns (MetricReport, generations)."""
    if not examples:
        raise ContractError("Cannot evaluate on an empty dataset")
    ppl = perplexity(model, examples)
    generations = generate_corpus(model, examples, cfg, vocab)
    report = build_report(examples, generations, vocab, ppl, window)
    logger.info(f"✅ Evaluated {report.count} examples: PPL {report.ppl:.2f}, Acc {100 * report.acc:.2f}")
    return report, generations
