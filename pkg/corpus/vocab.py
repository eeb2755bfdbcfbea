"""Word-level vocabulary with train-fitted IDF weights."""
import hashlib
import json
import logging
import math
import unicodedata
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from nltk.tokenize import wordpunct_tokenize
from sklearn.feature_extraction.text import TfidfVectorizer

from errors import ContractError, DataError, ParseError

logger = logging.getLogger(__name__)

PAD, UNK, CLS, BOS, EOS, SEP = "<pad>", "<unk>", "<cls>", "<bos>", "<eos>", "<sep>"
SPECIAL_TOKENS = (PAD, UNK, CLS, BOS, EOS, SEP)


def normalize_text(text: str) -> str:
    """Lowercase, fold accents and separate punctuation from words."""
    text = unicodedata.normalize("NFKD", text.lower())
    text = text.encode("ASCII", "ignore").decode("ASCII")
    return " ".join(wordpunct_tokenize(text))


def split_words(text: str) -> List[str]:
    return normalize_text(text).split()


def _identity(doc):
    return doc


def fit_idf(documents: Sequence[Sequence[str]], min_df: int = 1) -> Dict[str, float]:
    """idf(t) = ln(N / df(t)) over tokenized documents."""
    if not any(documents):
        raise DataError("Cannot fit IDF on an empty corpus")
    vectorizer = TfidfVectorizer(analyzer=_identity, lowercase=False, smooth_idf=False,
                                 norm=None, min_df=min_df)
    vectorizer.fit(documents)
    # sklearn adds 1 to the unsmoothed idf
    return {token: float(vectorizer.idf_[col]) - 1.0 for token, col in vectorizer.vocabulary_.items()}


class Vocab:
    """token <-> id map; special tokens take the lowest ids."""

    def __init__(self, tokens: Iterable[str], idf: Optional[Dict[str, float]] = None):
        self.itos: List[str] = list(SPECIAL_TOKENS)
        for token in tokens:
            if token in SPECIAL_TOKENS:
                raise DataError(f"Content token collides with a special token: {token}")
            self.itos.append(token)
        self.stoi: Dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise DataError("Vocabulary contains duplicate tokens")

        self.idf: Dict[str, float] = dict(idf or {})
        for token, value in self.idf.items():
            if not math.isfinite(value) or value < 0:
                raise DataError(f"IDF for {token!r} must be finite and non-negative, got {value}")

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    @property
    def cls_id(self) -> int:
        return 2

    @property
    def bos_id(self) -> int:
        return 3

    @property
    def eos_id(self) -> int:
        return 4

    @property
    def sep_id(self) -> int:
        return 5

    @property
    def special_ids(self) -> Dict[str, int]:
        return {"pad": self.pad_id, "unk": self.unk_id, "cls": self.cls_id, "bos": self.bos_id,
                "eos": self.eos_id, "sep": self.sep_id}

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def is_special(self, token_id: int) -> bool:
        return token_id < len(SPECIAL_TOKENS)

    def id(self, token: str) -> int:
        return self.stoi.get(token, self.unk_id)

    def token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.itos):
            raise DataError(f"Token id {token_id} outside vocabulary of size {len(self.itos)}")
        return self.itos[token_id]

    def words(self, ids: Iterable[int]) -> List[str]:
        return [self.token(i) for i in ids]

    def idf_of(self, token_id: int) -> float:
        return self.idf.get(self.itos[token_id], 0.0)

    @classmethod
    def build(cls, texts: Iterable[str], min_df: int = 1) -> "Vocab":
        """Fit token list and IDF on (training) texts."""
        documents = [split_words(t) for t in texts]
        idf = fit_idf(documents, min_df=min_df)
        df = Counter(token for doc in documents for token in set(doc))
        tokens = sorted(idf, key=lambda t: (-df[t], t))
        vocab = cls(tokens, idf)
        logger.info(f"📚 Built vocabulary: {len(vocab)} tokens from {len(documents)} utterances")
        return vocab

    @property
    def fingerprint(self) -> str:
        payload = json.dumps({"tokens": self.itos, "idf": sorted(self.idf.items())})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        content = self.itos[len(SPECIAL_TOKENS):]
        Path(path).write_text(json.dumps({"tokens": content, "idf": self.idf}, indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocab":
        text = Path(path).read_text(encoding="utf-8")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"Malformed vocabulary file {path}: {e.msg}", line=e.lineno) from e
        if "tokens" not in raw:
            raise DataError(f"Vocabulary file {path} has no token list")
        return cls(raw["tokens"], raw.get("idf"))


def tokenize(text: str, vocab: Vocab) -> List[int]:
    """Normalized words -> ids; OOV words map to UNK."""
    return [vocab.id(word) for word in split_words(text)]


def detokenize(ids: Iterable[int], vocab: Vocab) -> str:
    """Inverse of `tokenize` on in-vocabulary text; control tokens are dropped."""
    skip = {vocab.pad_id, vocab.cls_id, vocab.bos_id, vocab.eos_id, vocab.sep_id}
    return " ".join(vocab.token(i) for i in ids if i not in skip)


def encode_dialogues(dialogues, vocab: Vocab) -> None:
    """Fill `Utterance.tokens` in place."""
    if vocab is None:
        raise ContractError("encode_dialogues needs a built vocabulary")
    for dialogue in dialogues:
        for utterance in dialogue.utterances:
            utterance.tokens = tokenize(utterance.text, vocab)
