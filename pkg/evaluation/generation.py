"""Autoregressive response generation and teacher-forced perplexity."""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from config import GenerationConfig
from corpus.dataset import STRATEGIES
from corpus.vocab import Vocab, detokenize
from corpus.windows import Example
from errors import ContractError
from evaluation.sampling import sample_next
from modeling.model import ContextState, TurnStateModel
from numerics import tensor as T

logger = logging.getLogger(__name__)


@dataclass
class Generation:
    dialogue_id: str
    tokens: List[int]
    text: str
    strategy_probs: np.ndarray

    @property
    def predicted_strategy(self) -> str:
        return STRATEGIES[int(np.argmax(self.strategy_probs))]


def _blocked_ids(model: TurnStateModel, vocab: Optional[Vocab]) -> List[int]:
    blocked = [model.pad_id, model.bos_id, model.cls_id]
    if vocab is not None:
        blocked.append(vocab.sep_id)
    return blocked


def generate_tokens(model: TurnStateModel, context: ContextState, cfg: GenerationConfig,
                    rng: np.random.Generator, blocked: Iterable[int] = ()) -> List[int]:
    """Sample until EOS or the length limit; the full prefix is re-decoded each step."""
    blocked = list(blocked)
    limit = min(cfg.max_new_tokens, model.config.max_target_len - 1)
    prefix = [model.bos_id]
    generated: List[int] = []
    for _ in range(limit):
        logits = model.decode(context, prefix).data[-1].astype(np.float64)
        if blocked:
            logits[blocked] = -1e9
        token = sample_next(logits, generated, cfg, rng)
        if token == model.eos_id:
            break
        generated.append(token)
        prefix.append(token)
    return generated


def generate(model: TurnStateModel, example: Example, cfg: GenerationConfig,
             vocab: Optional[Vocab] = None, rng: Optional[np.random.Generator] = None) -> Generation:
    """Response for the placeholder turn of `example`, with the predicted strategy distribution."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    model.eval()
    with T.no_grad():
        context = model.encode(example)
        tokens = generate_tokens(model, context, cfg, rng, _blocked_ids(model, vocab))
    text = detokenize(tokens, vocab) if vocab is not None else " ".join(map(str, tokens))
    return Generation(example.dialogue_id, tokens, text, context.strategy_probs)


def generate_corpus(model: TurnStateModel, examples: List[Example], cfg: GenerationConfig,
                    vocab: Vocab) -> List[Generation]:
    """One generation per example; example i samples from the stream seeded (seed, i)."""
    results = []
    for i, example in enumerate(tqdm(examples, desc="Generating", disable=len(examples) < 2)):
        rng = np.random.default_rng([cfg.seed, i])
        results.append(generate(model, example, cfg, vocab, rng))
    return results


def generation_record(example: Example, generation: Generation, vocab: Vocab) -> Dict:
    return {
        "dialogue_id": example.dialogue_id,
        "context": [f"{u.speaker}: {u.text or detokenize(u.tokens, vocab)}" for u in example.history],
        "gold": example.target.text or detokenize(example.target.tokens, vocab),
        "generated": generation.text,
        "predicted_strategy": generation.predicted_strategy,
        "gold_strategy": example.target.strategy,
    }


def token_nll(model: TurnStateModel, example: Example) -> Tuple[float, int]:
    """(summed NLL, token count) of the gold response under teacher forcing."""
    model.eval()
    with T.no_grad():
        output = model(example)
    log_probs = T.log_softmax(output.logits, axis=-1).data
    gold = np.asarray(output.gold_next, dtype=np.int64)
    keep = gold != model.pad_id
    nll = -log_probs[np.flatnonzero(keep), gold[keep]].sum()
    return float(nll), int(keep.sum())


def perplexity_from_nll(total_nll: float, count: int) -> float:
    if count <= 0:
        raise ContractError("Perplexity needs at least one gold token")
    return math.exp(total_nll / count)


def perplexity(model: TurnStateModel, examples: List[Example]) -> float:
    """exp of the mean per-token NLL over every non-PAD gold token."""
    if not examples:
        raise ContractError("Cannot compute perplexity on an empty dataset")
    total, count = 0.0, 0
    for example in tqdm(examples, desc="Perplexity", disable=len(examples) < 2):
        nll, n = token_nll(model, example)
        total += nll
        count += n
    return perplexity_from_nll(total, count)
