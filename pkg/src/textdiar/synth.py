"""Synthetic conversations and controllable oracle predictors.

Generated conversations give every speaker a distinct vocabulary (plus a
shared function-word pool), so trained lexical models have real signal to
find. The oracle predictors skip modeling entirely: they read the gold
labels and corrupt them at a configured rate, which makes simulation
results comparable against closed-form expectations: each (window,
boundary) flip draws from its own seeded generator, so votes on the same
change point are independent across windows, exactly the regime the
majority-vote analysis assumes. The correlated mode marks a fraction of
change points as systematically hard (wrong in every window), the regime
where extra votes cannot help.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from hashlib import blake2b
from typing import Sequence

import numpy as np

from .errors import ConfigError, ValidationError
from .predictor import Predictor
from .transcript import Conversation, Sentence, derive_change_sequence
from .windowing import SpmContext

_SHARED_VOCAB = (
    "the", "a", "to", "and", "of", "in", "it", "is", "was", "for",
    "on", "that", "with", "as", "at", "this", "but", "so", "we", "you",
)

# One pool per speaker slot; pools are disjoint so speakers are separable.
_SPEAKER_VOCABS = (
    ("red", "blue", "green", "yellow", "purple", "orange",
     "crimson", "teal", "maroon", "silver", "golden", "violet"),
    ("dog", "cat", "horse", "eagle", "salmon", "badger",
     "otter", "falcon", "rabbit", "turtle", "bison", "crane"),
    ("bread", "cheese", "apple", "soup", "pepper", "olive",
     "noodle", "butter", "honey", "garlic", "raisin", "tomato"),
    ("hammer", "wrench", "chisel", "ladder", "pliers", "drill",
     "lathe", "anvil", "crowbar", "sander", "rivet", "gauge"),
    ("rain", "thunder", "breeze", "frost", "drizzle", "sunshine",
     "hail", "fog", "storm", "cloud", "snow", "wind"),
    ("violin", "trumpet", "drum", "piano", "cello", "flute",
     "banjo", "organ", "chord", "melody", "rhythm", "tempo"),
)

MAX_SYNTH_SPEAKERS = len(_SPEAKER_VOCABS)


@dataclass(frozen=True)
class SynthConfig:
    """Settings for the synthetic conversation generator."""

    min_sentences: int = 30
    max_sentences: int = 60
    num_speakers: int = 2
    change_rate: float = 0.3
    vocab_size: int = 12
    question_rate: float = 0.15
    exclaim_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.min_sentences < 2:
            raise ConfigError("min_sentences must be >= 2")
        if self.max_sentences < self.min_sentences:
            raise ConfigError("max_sentences must be >= min_sentences")
        if not 2 <= self.num_speakers <= MAX_SYNTH_SPEAKERS:
            raise ConfigError(
                f"num_speakers must be in 2..{MAX_SYNTH_SPEAKERS}")
        if not 0.0 <= self.change_rate <= 1.0:
            raise ConfigError("change_rate must be in [0, 1]")
        if not 2 <= self.vocab_size <= len(_SPEAKER_VOCABS[0]):
            raise ConfigError(
                f"vocab_size must be in 2..{len(_SPEAKER_VOCABS[0])}")
        if self.question_rate < 0 or self.exclaim_rate < 0 \
                or self.question_rate + self.exclaim_rate > 1.0:
            raise ConfigError("question_rate + exclaim_rate must fit in [0, 1]")


def _speaker_labels(num_speakers: int) -> tuple[str, ...]:
    return tuple(string.ascii_uppercase[:num_speakers])


def _make_sentence(rng: np.random.Generator, config: SynthConfig,
                   speaker_slot: int) -> str:
    pool = _SPEAKER_VOCABS[speaker_slot][:config.vocab_size]
    n_words = int(rng.integers(4, 11))
    words = []
    for _ in range(n_words):
        if rng.random() < 0.5:
            words.append(_SHARED_VOCAB[int(rng.integers(len(_SHARED_VOCAB)))])
        else:
            words.append(pool[int(rng.integers(len(pool)))])
    roll = rng.random()
    if roll < config.question_rate:
        punct = "?"
    elif roll < config.question_rate + config.exclaim_rate:
        punct = "!"
    else:
        punct = "."
    words[0] = words[0].capitalize()
    return " ".join(words) + punct


def generate_conversation(config: SynthConfig, conversation_id: str,
                          rng: np.random.Generator | None = None,
                          n_sentences: int | None = None) -> Conversation:
    """One gold-labeled conversation with word timings."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if n_sentences is None:
        n_sentences = int(rng.integers(config.min_sentences,
                                       config.max_sentences + 1))
    if n_sentences < 2:
        raise ConfigError("a conversation needs at least 2 sentences")
    labels = _speaker_labels(config.num_speakers)
    slot = int(rng.integers(config.num_speakers))
    sentences = []
    t = 0.0
    for i in range(n_sentences):
        if i > 0 and rng.random() < config.change_rate:
            step = 1 + int(rng.integers(config.num_speakers - 1))
            slot = (slot + step) % config.num_speakers
        text = _make_sentence(rng, config, slot)
        duration = float(rng.uniform(2.0, 6.0))
        sentences.append(Sentence(index=i, text=text, speaker=labels[slot],
                                  start_time=t, end_time=t + duration))
        t = t + duration + float(rng.uniform(0.2, 1.0))
    return Conversation(id=conversation_id, sentences=tuple(sentences),
                        duration=sentences[-1].end_time)


def generate_corpus(config: SynthConfig, count: int,
                    id_prefix: str = "synth") -> list[Conversation]:
    """``count`` conversations, each from its own (seed, index) stream."""
    if count < 1:
        raise ConfigError("count must be >= 1")
    corpus = []
    for i in range(count):
        rng = np.random.default_rng((config.seed, i))
        corpus.append(generate_conversation(
            config, f"{id_prefix}-{i:04d}", rng))
    return corpus


def _id_hash(conversation_id: str) -> int:
    digest = blake2b(conversation_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


# RNG stream roles, kept distinct so no two draws share a seed tuple.
_ROLE_MPM_FLIP = 0
_ROLE_SPM_FLIP = 1
_ROLE_HARD_POINTS = 2
_ROLE_WINDOW_PERM = 3
_ROLE_LABEL_FLIP = 4


class NoisyOracle(Predictor):
    """Gold change decisions corrupted at a configured error rate.

    Each (window, boundary) pair flips independently, so overlapping
    windows supply independent votes. With ``correlated_fraction`` > 0,
    that share of change points (chosen per conversation) is reported
    wrong in every window; no amount of voting recovers those.

    Emits ``confidence`` for a positive decision and 1 - confidence for a
    negative one, so any threshold in (1 - confidence, confidence) reads
    the intended vote.
    """

    kind = "noisy-oracle"

    def __init__(self, conv: Conversation, error_rate: float, seed: int = 0,
                 mode: str = "mpm", confidence: float = 0.9,
                 correlated_fraction: float = 0.0):
        if mode not in ("spm", "mpm"):
            raise ConfigError(f"unknown predictor mode {mode!r}")
        if not 0.0 <= error_rate < 0.5:
            raise ConfigError("error_rate must be in [0, 0.5)")
        if not 0.5 < confidence <= 1.0:
            raise ConfigError("confidence must be in (0.5, 1]")
        if not 0.0 <= correlated_fraction <= 1.0:
            raise ConfigError("correlated_fraction must be in [0, 1]")
        gold = conv.speakers
        if gold is None:
            raise ValidationError(
                f"conversation {conv.id!r} has no speaker labels to corrupt")
        self.mode = mode
        self.error_rate = error_rate
        self.seed = seed
        self.confidence = confidence
        self.correlated_fraction = correlated_fraction
        self._decisions = derive_change_sequence(gold).decisions
        self._conv_hash = _id_hash(conv.id)
        n_points = len(self._decisions)
        hard = frozenset()
        if correlated_fraction > 0.0 and n_points > 0:
            n_hard = int(round(correlated_fraction * n_points))
            rng = np.random.default_rng(
                (seed, self._conv_hash, _ROLE_HARD_POINTS))
            hard = frozenset(
                int(i) for i in rng.choice(n_points, size=n_hard, replace=False))
        self.hard_points = hard

    def _flip(self, role: int, window_key: int, change_index: int) -> bool:
        if change_index in self.hard_points:
            return True
        if self.error_rate == 0.0:
            return False
        rng = np.random.default_rng(
            (self.seed, self._conv_hash, role, window_key, change_index))
        return bool(rng.random() < self.error_rate)

    def _emit(self, decision: int) -> float:
        return self.confidence if decision == 1 else 1.0 - self.confidence

    def predict_boundary(self, ctx: SpmContext) -> float:
        if ctx.change_index >= len(self._decisions):
            raise ValidationError(
                f"change index {ctx.change_index} outside oracle conversation")
        d = self._decisions[ctx.change_index]
        if self._flip(_ROLE_SPM_FLIP, 0, ctx.change_index):
            d = 1 - d
        return self._emit(d)

    def predict_window(self, sentences: Sequence[Sentence]) -> list[float]:
        indices = [s.index for s in sentences]
        if len(indices) < 2:
            raise ValidationError("window must contain at least 2 sentences")
        if indices != list(range(indices[0], indices[0] + len(indices))):
            raise ValidationError("oracle windows must be contiguous slices")
        start = indices[0]
        out = []
        for i in range(len(indices) - 1):
            p = start + i
            if p >= len(self._decisions):
                raise ValidationError(
                    f"change index {p} outside oracle conversation")
            d = self._decisions[p]
            if self._flip(_ROLE_MPM_FLIP, start, p):
                d = 1 - d
            out.append(self._emit(d))
        return out


class PermutedLabelOracle(Predictor):
    """Gold speaker labels behind a fresh channel permutation per window.

    Models trained per window have no global notion of who "speaker 0"
    is; this oracle reproduces that: within a window labels are
    (optionally noisily) correct relative to each other, but the channel
    order is an arbitrary permutation drawn per window. Consistent
    labeling must be recovered by matching adjacent windows on their
    overlap.
    """

    kind = "permuted-label-oracle"
    mode = "mpm"

    def __init__(self, conv: Conversation, seed: int = 0,
                 confidence: float = 0.95, error_rate: float = 0.0,
                 labels: Sequence[str] | None = None):
        gold = conv.speakers
        if gold is None:
            raise ValidationError(
                f"conversation {conv.id!r} has no speaker labels")
        if labels is None:
            labels = sorted(set(gold.labels))
        label_index = {lab: i for i, lab in enumerate(labels)}
        for lab in gold.labels:
            if lab not in label_index:
                raise ValidationError(
                    f"speaker {lab!r} not in label set {list(labels)}")
        if len(labels) < 2:
            raise ConfigError("need at least 2 labels")
        if not 0.0 <= error_rate <= 1.0:
            raise ConfigError("error_rate must be in [0, 1]")
        if not 0.5 < confidence <= 1.0:
            raise ConfigError("confidence must be in (0.5, 1]")
        self.labels = tuple(labels)
        self.error_rate = error_rate
        self.confidence = confidence
        self.seed = seed
        self._gold_idx = tuple(label_index[lab] for lab in gold.labels)
        self._conv_hash = _id_hash(conv.id)

    @property
    def num_speakers(self) -> int:
        return len(self.labels)

    def window_permutation(self, window_start: int) -> np.ndarray:
        """The channel permutation used for the window at this start
        index; perm[true_label] is the emitted channel."""
        rng = np.random.default_rng(
            (self.seed, self._conv_hash, _ROLE_WINDOW_PERM, window_start))
        return rng.permutation(self.num_speakers)

    def predict_labels(self, sentences: Sequence[Sentence]) -> np.ndarray:
        indices = [s.index for s in sentences]
        if not indices:
            raise ValidationError("window must contain at least 1 sentence")
        if indices != list(range(indices[0], indices[0] + len(indices))):
            raise ValidationError("oracle windows must be contiguous slices")
        start = indices[0]
        p = self.num_speakers
        perm = self.window_permutation(start)
        low = (1.0 - self.confidence) / (p - 1)
        rows = np.full((len(indices), p), low)
        for row, idx in enumerate(indices):
            true = self._gold_idx[idx]
            if self.error_rate > 0.0:
                rng = np.random.default_rng(
                    (self.seed, self._conv_hash, _ROLE_LABEL_FLIP, start, idx))
                if rng.random() < self.error_rate:
                    offset = 1 + int(rng.integers(p - 1))
                    true = (true + offset) % p
            rows[row, perm[true]] = self.confidence
        return rows
