"""Sliding-window labeling for conversations with any number of speakers.

A window model emits a label distribution per sentence, but its label
channels mean nothing outside the window: channel 2 of one window and
channel 2 of the next may be different people. Unification fixes that by
matching each window to its predecessor on the sentences they share:
count how often channel a (left) co-occurs with channel b (right) on the
overlap, take the permutation with the highest total agreement, and
composing the pairwise permutations left to right so every window speaks
window 0's label language. Sentences covered by several windows then
take the majority label, with accumulated probability mass breaking ties.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._assignment import DEFAULT_EXHAUSTIVE_LIMIT, best_permutation
from .errors import ConfigError, ValidationError
from .predictor import Predictor
from .transcript import Conversation, SpeakerAssignment, Sentence
from .windowing import (DEFAULT_STRIDE, DEFAULT_WINDOW_LEN, MpmWindow,
                        build_mpm_windows)


@dataclass(frozen=True)
class SpeakerLabelSet:
    """The ordered label names a multi-speaker run can assign."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 2:
            raise ValidationError("a label set needs at least 2 labels")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("labels must be distinct")

    @property
    def p(self) -> int:
        return len(self.labels)

    @classmethod
    def default(cls, p: int) -> "SpeakerLabelSet":
        if not 2 <= p <= len(string.ascii_uppercase):
            raise ConfigError(f"cannot build a default label set for p={p}")
        return cls(tuple(string.ascii_uppercase[:p]))


@dataclass(frozen=True, eq=False)
class WindowLabeling:
    """Per-sentence label distributions for one window.

    ``distributions[i, c]`` is the probability that the window's i-th
    sentence belongs to channel c.
    """

    window_index: int
    start: int
    distributions: np.ndarray

    def __post_init__(self):
        d = self.distributions
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 2:
            raise ValidationError(
                f"distributions must be (sentences >= 1, channels >= 2), "
                f"got {d.shape}")
        if np.any(d < 0.0):
            raise ValidationError("distributions must be non-negative")
        sums = d.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValidationError("each distribution row must sum to 1")

    @property
    def stop(self) -> int:
        return self.start + self.distributions.shape[0]

    @property
    def num_channels(self) -> int:
        return self.distributions.shape[1]

    @property
    def channel_labels(self) -> tuple[int, ...]:
        """Argmax channel per sentence (lowest channel wins ties)."""
        return tuple(int(c) for c in np.argmax(self.distributions, axis=1))

    def relabeled(self, mapping: Sequence[int]) -> "WindowLabeling":
        """Rename channels: new channel ``mapping[c]`` takes column c."""
        p = self.num_channels
        if sorted(mapping) != list(range(p)):
            raise ValidationError(
                f"mapping {tuple(mapping)} is not a permutation of 0..{p - 1}")
        out = np.empty_like(self.distributions)
        for c in range(p):
            out[:, mapping[c]] = self.distributions[:, c]
        return WindowLabeling(self.window_index, self.start, out)


def predict_window_labels(model: Predictor, window: MpmWindow,
                          sentences: Sequence[Sentence]) -> WindowLabeling:
    """Run a multi-speaker model on one window of a conversation."""
    predict = getattr(model, "predict_labels", None)
    if predict is None:
        raise ConfigError(
            f"predictor kind {model.kind!r} does not produce label "
            f"distributions")
    window_sents = tuple(sentences)[window.start:window.stop]
    dist = np.asarray(predict(window_sents), dtype=np.float64)
    if dist.shape[0] != len(window_sents):
        raise ValidationError(
            f"window {window.window_index}: got {dist.shape[0]} rows for "
            f"{len(window_sents)} sentences")
    return WindowLabeling(window.window_index, window.start, dist)


def agreement_matrix(left: WindowLabeling, right: WindowLabeling) -> np.ndarray:
    """Channel co-occurrence counts over the sentences both windows cover.

    Entry [a, b] counts overlap sentences the left window puts in channel
    a and the right window puts in channel b.
    """
    if left.num_channels != right.num_channels:
        raise ValidationError(
            f"channel counts differ: {left.num_channels} vs {right.num_channels}")
    lo = max(left.start, right.start)
    hi = min(left.stop, right.stop)
    if lo >= hi:
        raise ValidationError(
            f"windows {left.window_index} and {right.window_index} share no "
            f"sentences; reduce the stride so consecutive windows overlap")
    p = left.num_channels
    left_labels = left.channel_labels
    right_labels = right.channel_labels
    m = np.zeros((p, p), dtype=np.float64)
    for idx in range(lo, hi):
        a = left_labels[idx - left.start]
        b = right_labels[idx - right.start]
        m[a, b] += 1.0
    return m


def match_labels(left: WindowLabeling, right: WindowLabeling,
                 exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT
                 ) -> tuple[int, ...]:
    """Map right-window channels onto left-window channels.

    Returns ``sigma`` with ``sigma[b] = a``: right channel b means the
    same speaker as left channel a, chosen to maximize overlap agreement.
    """
    m = agreement_matrix(left, right)
    # best_permutation maximizes score[i, perm[i]]; orient rows as right
    # channels so the result maps right -> left.
    return best_permutation(m.T, exhaustive_limit)


def compose_mappings(labelings: Sequence[WindowLabeling],
                     exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT
                     ) -> tuple[tuple[int, ...], ...]:
    """Global channel mapping per window, composed left to right.

    The first window's channels are the global space; every later window
    routes through the pairwise match with its predecessor, then through
    the predecessor's own mapping. ``mapping[c]`` is channel c's global
    label.
    """
    if not labelings:
        return ()
    p = labelings[0].num_channels
    mappings = [tuple(range(p))]
    for j in range(1, len(labelings)):
        sigma = match_labels(labelings[j - 1], labelings[j], exhaustive_limit)
        prev = mappings[-1]
        mappings.append(tuple(prev[sigma[c]] for c in range(p)))
    return tuple(mappings)


def unify_labels(labelings: Sequence[WindowLabeling],
                 exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT
                 ) -> tuple[WindowLabeling, ...]:
    """Rewrite all windows into the first window's label space.

    Pure renaming: each window's per-sentence partition is unchanged,
    only channel identities move.
    """
    mappings = compose_mappings(labelings, exhaustive_limit)
    return tuple(lab.relabeled(m) for lab, m in zip(labelings, mappings))


def aggregate_multispeaker(n: int, unified: Sequence[WindowLabeling]
                           ) -> tuple[int, ...]:
    """Majority label per sentence across all covering windows.

    Each window votes its argmax channel; ties go to the label with the
    most accumulated probability mass, then to the lowest label index.
    Expects labelings already in one shared label space.
    """
    if not unified:
        raise ValidationError("no window labelings to aggregate")
    p = unified[0].num_channels
    votes = np.zeros((n, p))
    mass = np.zeros((n, p))
    covered = np.zeros(n, dtype=bool)
    for labeling in unified:
        if labeling.stop > n:
            raise ValidationError(
                f"window at {labeling.start} extends past {n} sentences")
        channels = labeling.channel_labels
        for row, idx in enumerate(range(labeling.start, labeling.stop)):
            covered[idx] = True
            votes[idx, channels[row]] += 1.0
            mass[idx] += labeling.distributions[row]
    if not covered.all():
        missing = int(np.argmin(covered))
        raise ValidationError(f"sentence {missing} is covered by no window")
    out = []
    for idx in range(n):
        v = votes[idx]
        top = np.flatnonzero(v == v.max())
        if len(top) > 1:
            m = mass[idx][top]
            top = top[np.flatnonzero(m == m.max())]
        out.append(int(top[0]))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class MultispeakerRunResult:
    """Window labelings (raw and unified) plus the final assignment."""

    conversation_id: str
    labelings: tuple[WindowLabeling, ...]
    mappings: tuple[tuple[int, ...], ...]
    unified: tuple[WindowLabeling, ...]
    sentence_labels: tuple[int, ...]
    assignment: SpeakerAssignment


def run_multispeaker(model: Predictor, conv: Conversation,
                     window_len: int = DEFAULT_WINDOW_LEN,
                     stride: int = DEFAULT_STRIDE,
                     label_set: SpeakerLabelSet | None = None,
                     exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT
                     ) -> MultispeakerRunResult:
    """Label every sentence of a conversation with a consistent speaker.

    ``label_set`` names the output labels (defaults to "A", "B", ...);
    the model decides how many channels exist.
    """
    n = len(conv)
    if n == 0:
        raise ValidationError(f"conversation {conv.id!r} is empty")
    if n == 1:
        # Too short for a real window; label the lone sentence directly.
        predict = getattr(model, "predict_labels", None)
        if predict is None:
            raise ConfigError(
                f"predictor kind {model.kind!r} does not produce label "
                f"distributions")
        dist = np.asarray(predict(conv.sentences), dtype=np.float64)
        labelings = (WindowLabeling(0, 0, dist),)
    else:
        window_set = build_mpm_windows(n, window_len, stride)
        labelings = tuple(predict_window_labels(model, w, conv.sentences)
                          for w in window_set.windows)
    mappings = compose_mappings(labelings, exhaustive_limit)
    unified = tuple(lab.relabeled(m) for lab, m in zip(labelings, mappings))
    sentence_labels = aggregate_multispeaker(n, unified)
    p = labelings[0].num_channels
    if label_set is None:
        label_set = SpeakerLabelSet.default(p)
    if label_set.p < p:
        raise ConfigError(f"{label_set.p} label names for {p} channels")
    assignment = SpeakerAssignment(
        tuple(label_set.labels[g] for g in sentence_labels))
    return MultispeakerRunResult(conv.id, labelings, mappings, unified,
                                 sentence_labels, assignment)
