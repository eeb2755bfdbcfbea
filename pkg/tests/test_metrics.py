"""Tests for BLEU, ROUGE-L, Distinct-n, strategy accuracy, perplexity and the metric report."""
import json
import math
from functools import lru_cache

import numpy as np
import pytest

from config import GenerationConfig
from corpus.dataset import STRATEGY_INDEX
from errors import ContractError
from evaluation.generation import Generation, perplexity, perplexity_from_nll
from evaluation.metrics import (
    SMOOTHING_EPSILON, bleu_n, corpus_bleu, distinct_n, lcs_length, rouge_l, strategy_accuracy,
    top_n_accuracies,
)
from evaluation.report import MetricReport, build_report, evaluate_model, response_words


def _grams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def _brute_bleu(candidate, reference, n):
    if not candidate:
        return 0.0
    log_p = 0.0
    for order in range(1, n + 1):
        cand, ref = _grams(candidate, order), _grams(reference, order)
        matched = sum(min(cand.count(g), ref.count(g)) for g in set(cand))
        precision = matched / len(cand) if cand and matched else SMOOTHING_EPSILON
        log_p += math.log(precision) / n
    c, r = len(candidate), len(reference)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(log_p)


def _brute_lcs(a, b):
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))
    return go(0, 0)


def _random_pair(rng):
    alphabet = list("abcd")
    a = [alphabet[i] for i in rng.integers(0, 4, size=int(rng.integers(1, 8)))]
    b = [alphabet[i] for i in rng.integers(0, 4, size=int(rng.integers(1, 8)))]
    return a, b


class TestBleu:

    def test_identical_is_one(self):
        tokens = "i hear you it sounds hard".split()
        assert bleu_n(tokens, tokens, 4) == pytest.approx(1.0)

    def test_hand_bigram_case(self):
        assert bleu_n("the cat sat".split(), "the cat ran".split(), 2) == pytest.approx(math.sqrt(1 / 3))

    def test_no_overlap_is_near_zero(self):
        assert bleu_n(["x", "y"], ["a", "b"], 2) < 1e-8

    def test_empty_candidate(self):
        assert bleu_n([], ["a"], 2) == 0.0

    def test_order_out_of_range(self):
        with pytest.raises(ContractError):
            bleu_n(["a"], ["a"], 5)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a, b = _random_pair(rng)
            for n in (2, 4):
                assert bleu_n(a, b, n) == pytest.approx(_brute_bleu(a, b, n), abs=1e-9)

    def test_corpus_pools_counts(self):
        candidates = [["a", "b"], ["c"]]
        references = [["a", "b"], ["d"]]
        assert corpus_bleu(candidates, references, 1) == pytest.approx(2 / 3)

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            corpus_bleu([["a"]], [], 2)


class TestRougeL:

    def test_hand_case(self):
        p, r, beta = 3 / 4, 1.0, 1.2
        expected = (1 + beta ** 2) * p * r / (r + beta ** 2 * p)
        assert rouge_l("a b c d".split(), "a c d".split()) == pytest.approx(expected)

    def test_identical_and_disjoint(self):
        assert rouge_l(["a", "b"], ["a", "b"]) == pytest.approx(1.0)
        assert rouge_l(["a"], ["b"]) == 0.0
        assert rouge_l([], ["b"]) == 0.0

    def test_lcs_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a, b = _random_pair(rng)
            lcs = _brute_lcs(tuple(a), tuple(b))
            assert lcs_length(a, b) == lcs
            if lcs:
                p, r = lcs / len(a), lcs / len(b)
                expected = (1 + 1.2 ** 2) * p * r / (r + 1.2 ** 2 * p)
                assert rouge_l(a, b) == pytest.approx(expected, abs=1e-9)


class TestDistinct:

    @pytest.mark.parametrize("corpus,n,expected", [
        ([["a", "b", "a"]], 1, 2 / 3),
        ([["a", "b", "c"]], 1, 1.0),
        ([["a"] * 5], 1, 1 / 5),
        ([["a", "b"], ["a", "b"]], 2, 1 / 2),
        ([["a"]], 2, 0.0),
    ])
    def test_hand_cases(self, corpus, n, expected):
        assert distinct_n(corpus, n) == pytest.approx(expected)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            corpus = list(_random_pair(rng))
            for n in (1, 2):
                grams = [g for tokens in corpus for g in _grams(tokens, n)]
                expected = len(set(grams)) / len(grams) if grams else 0.0
                assert distinct_n(corpus, n) == pytest.approx(expected, abs=1e-9)


class TestStrategyAccuracy:

    def test_hand_counting(self):
        predictions = [np.eye(8)[i] for i in (0, 1, 2, 3)]
        assert strategy_accuracy(predictions, [0, 1, 5, 6]) == 0.5

    def test_top_n_is_monotone_and_complete(self):
        rng = np.random.default_rng(3)
        predictions = [rng.dirichlet(np.ones(8)) for _ in range(30)]
        golds = rng.integers(0, 8, size=30).tolist()
        accuracies = top_n_accuracies(predictions, golds, 8)
        assert accuracies == sorted(accuracies)
        assert accuracies[-1] == 1.0

    def test_mismatch_and_empty(self):
        with pytest.raises(ContractError):
            strategy_accuracy([np.ones(8)], [0, 1])
        with pytest.raises(ContractError):
            strategy_accuracy([], [])


class TestPerplexity:

    def test_hand_cases(self):
        assert perplexity_from_nll(2 * math.log(10), 2) == pytest.approx(10.0)
        assert perplexity_from_nll(0.0, 3) == 1.0
        assert perplexity_from_nll(-(math.log(0.5) + math.log(0.2)), 2) == pytest.approx(3.1623, abs=1e-4)

    def test_no_tokens(self):
        with pytest.raises(ContractError):
            perplexity_from_nll(1.0, 0)

    def test_model_perplexity(self, tiny_model, examples, vocab):
        ppl = perplexity(tiny_model, examples)
        assert 1.0 < ppl < 10 * len(vocab)

    def test_empty_dataset(self, tiny_model):
        with pytest.raises(ContractError):
            perplexity(tiny_model, [])


class TestReport:

    def test_perfect_generations(self, examples, vocab):
        generations = [Generation(e.dialogue_id, list(e.target.tokens), "",
                                  np.eye(8)[STRATEGY_INDEX[e.target.strategy]]) for e in examples]
        report = build_report(examples, generations, vocab, ppl=1.0, window=2)
        assert report.b2 == pytest.approx(1.0)
        assert report.rl == pytest.approx(1.0)
        assert report.acc == 1.0
        assert list(report.acc_top_n) == list(range(1, 9))
        assert report.count == len(examples) and report.window == 2

    def test_scored_words_keep_unk(self, vocab):
        ids = [vocab.bos_id, vocab.id("sad"), vocab.unk_id, vocab.eos_id, vocab.pad_id]
        assert response_words(ids, vocab) == ["sad", "<unk>"]

    def test_save_and_table(self, tmp_path):
        report = MetricReport(ppl=12.5, b1=0.2, b2=0.1, b3=0.05, b4=0.02, rl=0.15, d1=0.3, d2=0.6, acc=0.25,
                              acc_top_n={1: 0.25, 2: 0.5}, count=4)
        path = tmp_path / "report.json"
        report.save(path)
        data = json.loads(path.read_text())
        assert data["acc_top_n"] == {"1": 0.25, "2": 0.5}
        table = report.table()
        assert "12.5000" in table and "25.00" in table

    def test_evaluate_model(self, tiny_model, examples, vocab):
        report, generations = evaluate_model(tiny_model, examples, vocab, GenerationConfig(max_new_tokens=4))
        assert len(generations) == report.count == len(examples)
        assert 0.0 <= report.d1 <= 1.0 and 0.0 <= report.d2 <= 1.0
        assert report.acc <= report.acc_top_n[2] <= report.acc_top_n[8] == 1.0
