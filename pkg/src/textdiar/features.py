"""Lexical feature extraction for the builtin baseline predictors.

Sentence pairs are encoded as sparse vectors: signed-hashed word unigrams
and bigrams of each pair member, log-scaled length features, terminal
punctuation indicators, the Jaccard token overlap of the pair, and a bias
term. Hashing uses a keyed blake2b digest, so vectors are stable across
processes and platforms (Python's builtin ``hash`` is salted per process
and is deliberately not used).
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .transcript import Sentence

DEFAULT_BUCKETS = 2 ** 18

_WORD_RE = re.compile(r"[\w']+")

# Dense slots appended after the hashed buckets, in order.
PAIR_DENSE_SLOTS = (
    "log_tokens_left", "log_tokens_right",
    "log_chars_left", "log_chars_right",
    "left_question", "left_exclam",
    "right_question", "right_exclam",
    "jaccard_overlap", "bias",
)
SENT_DENSE_SLOTS = ("log_tokens", "log_chars", "question", "exclam", "bias")


def tokens(text: str) -> list[str]:
    """Lowercased word tokens (apostrophes kept inside words)."""
    return _WORD_RE.findall(text.lower())


def _stable_hash(s: str) -> int:
    digest = hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class FeaturizerConfig:
    """Controls the hashed feature space.

    ``n_buckets`` hashed slots are followed by the dense slots, giving a
    fixed total dimension per config. ``kind`` selects the layout: "pair"
    for boundary features, "sentence" for per-sentence label features.
    """

    n_buckets: int = DEFAULT_BUCKETS
    kind: str = "pair"

    def __post_init__(self):
        if self.n_buckets < 1:
            raise ConfigError(f"n_buckets must be >= 1, got {self.n_buckets}")
        if self.kind not in ("pair", "sentence"):
            raise ConfigError(f"unknown featurizer kind {self.kind!r}")

    @property
    def dense_slots(self) -> tuple[str, ...]:
        return PAIR_DENSE_SLOTS if self.kind == "pair" else SENT_DENSE_SLOTS

    @property
    def dim(self) -> int:
        return self.n_buckets + len(self.dense_slots)

    def to_dict(self) -> dict:
        return {"n_buckets": self.n_buckets, "kind": self.kind}

    @staticmethod
    def from_dict(obj: dict) -> "FeaturizerConfig":
        return FeaturizerConfig(n_buckets=int(obj["n_buckets"]), kind=obj["kind"])


@dataclass(frozen=True)
class FeatureVector:
    """Sparse real vector of fixed dimension ``dim``.

    ``indices`` are strictly increasing; ``values`` are finite.
    """

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        dense[self.indices] = self.values
        return dense

    def dot(self, w: np.ndarray) -> float:
        return float(np.dot(self.values, w[self.indices]))


def _hashed_terms(buckets: dict[int, float], words: list[str], prefix: str,
                  n_buckets: int) -> None:
    grams = [f"{prefix}:{w}" for w in words]
    grams += [f"{prefix}2:{a} {b}" for a, b in zip(words, words[1:])]
    for g in grams:
        h = _stable_hash(g)
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        slot = h % n_buckets
        buckets[slot] = buckets.get(slot, 0.0) + sign


def _pack(buckets: dict[int, float], dense: list[float],
          config: FeaturizerConfig) -> FeatureVector:
    for j, v in enumerate(dense):
        if v != 0.0:
            buckets[config.n_buckets + j] = v
    indices = np.array(sorted(buckets), dtype=np.int64)
    values = np.array([buckets[i] for i in indices], dtype=np.float64)
    return FeatureVector(indices=indices, values=values, dim=config.dim)


def jaccard_overlap(left: Sentence, right: Sentence) -> float:
    """Jaccard similarity of the pair's lowercased token sets.

    Two token-less sentences count as identical (1.0); one token-less
    sentence against a non-empty one is disjoint (0.0).
    """
    a, b = set(tokens(left.text)), set(tokens(right.text))
    if not a and not b:
        return 1.0
    union = a | b
    return len(a & b) / len(union)


def featurize(pair_left: Sentence, pair_right: Sentence,
              context: tuple[Sentence, ...] = (),
              config: FeaturizerConfig | None = None) -> FeatureVector:
    """Feature vector for one boundary pair.

    Deterministic in its inputs; ``context`` is accepted for signature
    parity with context-aware predictors but does not enter the default
    lexical feature set.
    """
    config = config or FeaturizerConfig()
    if config.kind != "pair":
        raise ConfigError("featurize requires a 'pair' featurizer config")
    lt, rt = tokens(pair_left.text), tokens(pair_right.text)
    buckets: dict[int, float] = {}
    _hashed_terms(buckets, lt, "L", config.n_buckets)
    _hashed_terms(buckets, rt, "R", config.n_buckets)
    left_text, right_text = pair_left.text.strip(), pair_right.text.strip()
    dense = [
        math.log1p(len(lt)),
        math.log1p(len(rt)),
        math.log1p(len(left_text)),
        math.log1p(len(right_text)),
        1.0 if left_text.endswith("?") else 0.0,
        1.0 if left_text.endswith("!") else 0.0,
        1.0 if right_text.endswith("?") else 0.0,
        1.0 if right_text.endswith("!") else 0.0,
        jaccard_overlap(pair_left, pair_right),
        1.0,
    ]
    return _pack(buckets, dense, config)


def featurize_sentence(sentence: Sentence,
                       context: tuple[Sentence, ...] = (),
                       config: FeaturizerConfig | None = None) -> FeatureVector:
    """Feature vector for one sentence (multi-speaker label head input)."""
    config = config or FeaturizerConfig(kind="sentence")
    if config.kind != "sentence":
        raise ConfigError("featurize_sentence requires a 'sentence' featurizer config")
    toks = tokens(sentence.text)
    buckets: dict[int, float] = {}
    _hashed_terms(buckets, toks, "S", config.n_buckets)
    text = sentence.text.strip()
    dense = [
        math.log1p(len(toks)),
        math.log1p(len(text)),
        1.0 if text.endswith("?") else 0.0,
        1.0 if text.endswith("!") else 0.0,
        1.0,
    ]
    return _pack(buckets, dense, config)


def stack_features(vectors: list[FeatureVector]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSR arrays (indptr, indices, values) for a list of feature vectors."""
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(v.indices)
    indices = np.concatenate([v.indices for v in vectors]) if vectors else np.zeros(0, np.int64)
    values = np.concatenate([v.values for v in vectors]) if vectors else np.zeros(0, np.float64)
    return indptr, indices, values
