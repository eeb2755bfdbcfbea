"""Automatic response metrics: BLEU, ROUGE-L, Distinct-n and strategy accuracy."""
import math
from collections import Counter
from typing import List, Sequence

import numpy as np
from nltk.translate.bleu_score import brevity_penalty
from nltk.util import ngrams

from errors import ContractError

SMOOTHING_EPSILON = 1e-9
ROUGE_BETA = 1.2

Tokens = Sequence[str]


def _ngram_counts(tokens: Tokens, n: int) -> Counter:
    return Counter(ngrams(list(tokens), n))


def corpus_bleu(candidates: Sequence[Tokens], references: Sequence[Tokens], n: int = 4) -> float:
    """Corpus-level BLEU-n with uniform weights and add-epsilon smoothing of zero precisions."""
    if not 1 <= n <= 4:
        raise ContractError(f"BLEU order must be in 1..4, got {n}")
    if len(candidates) != len(references):
        raise ContractError(f"{len(candidates)} candidates for {len(references)} references")
    hyp_len = sum(len(c) for c in candidates)
    if hyp_len == 0:
        return 0.0
    ref_len = sum(len(r) for r in references)

    log_precision = 0.0
    for order in range(1, n + 1):
        matched = total = 0
        for candidate, reference in zip(candidates, references):
            cand_counts = _ngram_counts(candidate, order)
            ref_counts = _ngram_counts(reference, order)
            matched += sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
            total += sum(cand_counts.values())
        precision = matched / total if total and matched else SMOOTHING_EPSILON
        log_precision += math.log(precision) / n
    return brevity_penalty(ref_len, hyp_len) * math.exp(log_precision)


def bleu_n(candidate: Tokens, reference: Tokens, n: int) -> float:
    return corpus_bleu([candidate], [reference], n)


def lcs_length(a: Tokens, b: Tokens) -> int:
    if not a or not b:
        return 0
    table = np.zeros((len(a) + 1, len(b) + 1), dtype=np.int64)
    b_arr = np.array(b, dtype=object)
    for i, token in enumerate(a, start=1):
        match = b_arr == token
        row = table[i]
        prev = table[i - 1]
        for j in range(1, len(b) + 1):
            row[j] = prev[j - 1] + 1 if match[j - 1] else max(prev[j], row[j - 1])
    return int(table[-1, -1])


def rouge_l(candidate: Tokens, reference: Tokens, beta: float = ROUGE_BETA) -> float:
    """LCS F-measure, recall weighted by beta."""
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return (1 + beta ** 2) * precision * recall / (recall + beta ** 2 * precision)


def corpus_rouge_l(candidates: Sequence[Tokens], references: Sequence[Tokens], beta: float = ROUGE_BETA) -> float:
    if len(candidates) != len(references):
        raise ContractError(f"{len(candidates)} candidates for {len(references)} references")
    if not candidates:
        return 0.0
    return float(np.mean([rouge_l(c, r, beta) for c, r in zip(candidates, references)]))


def distinct_n(corpus: Sequence[Tokens], n: int) -> float:
    """Unique n-grams over total n-grams across the whole generated corpus."""
    grams = Counter()
    for tokens in corpus:
        grams.update(_ngram_counts(tokens, n))
    total = sum(grams.values())
    return len(grams) / total if total else 0.0


def strategy_accuracy(predictions: Sequence[np.ndarray], golds: Sequence[int], n: int = 1) -> float:
    """Share of rows whose gold class is among the n most probable (ties go to the lower id)."""
    if len(predictions) != len(golds):
        raise ContractError(f"{len(predictions)} predictions for {len(golds)} gold labels")
    if not golds:
        raise ContractError("Strategy accuracy needs at least one prediction")
    hits = 0
    for probs, gold in zip(predictions, golds):
        top = np.argsort(-np.asarray(probs), kind="stable")[:n]
        hits += int(gold in top)
    return hits / len(golds)


def top_n_accuracies(predictions: Sequence[np.ndarray], golds: Sequence[int], max_n: int) -> List[float]:
    return [strategy_accuracy(predictions, golds, n) for n in range(1, max_n + 1)]
