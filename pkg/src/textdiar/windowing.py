"""Prediction contexts and sliding windows over a conversation.

Single-prediction contexts carry one boundary plus surrounding sentences;
multi-prediction windows are overlapping contiguous spans, each covering
all boundaries inside it. The coverage map links every change point to
the windows that vote on it.

Change points are 0-based: point p sits between sentences p and p+1.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError, ValidationError
from .transcript import Conversation, Sentence

DEFAULT_WINDOW_LEN = 8
DEFAULT_STRIDE = 1
# Near-symmetric split of an 8-sentence context around the boundary pair.
DEFAULT_H = 4
DEFAULT_K = 3


@dataclass(frozen=True)
class SpmContext:
    """Context for one single-boundary prediction.

    Attributes:
        change_index: 0-based change point p (between sentences p, p+1).
        sentences: the context sentences, in order.
        boundary_offset: position of sentence p within ``sentences``; the
            boundary pair is sentences[boundary_offset] and
            sentences[boundary_offset + 1].
        h: requested front-context length (sentences up to and including p).
        k: requested back-context length (sentences after p+1).
    """

    change_index: int
    sentences: tuple[Sentence, ...]
    boundary_offset: int
    h: int
    k: int

    @property
    def pair(self) -> tuple[Sentence, Sentence]:
        return (self.sentences[self.boundary_offset],
                self.sentences[self.boundary_offset + 1])


@dataclass(frozen=True)
class MpmWindow:
    """One sliding window: sentences [start, stop) of the conversation."""

    window_index: int
    start: int
    stop: int

    def __post_init__(self):
        if self.stop - self.start < 2:
            raise ValidationError(
                f"window {self.window_index}: length {self.stop - self.start} < 2")

    def __len__(self) -> int:
        return self.stop - self.start

    @property
    def change_points(self) -> range:
        """Change points whose boundary pair lies inside the window."""
        return range(self.start, self.stop - 1)

    def sentences(self, conv: Conversation) -> tuple[Sentence, ...]:
        return conv.sentences[self.start:self.stop]


@dataclass(frozen=True)
class WindowSet:
    """Windows over an n-sentence conversation plus their coverage map."""

    n: int
    windows: tuple[MpmWindow, ...]
    coverage_map: dict[int, tuple[int, ...]]

    def coverage(self, p: int) -> tuple[int, ...]:
        """Ordered window indices covering change point p."""
        if p < 0 or p > self.n - 2:
            raise ValidationError(
                f"change point {p} outside 0..{self.n - 2}")
        return self.coverage_map[p]

    def windows_covering_sentence(self, idx: int) -> tuple[int, ...]:
        """Ordered window indices whose span contains sentence idx."""
        if idx < 0 or idx >= self.n:
            raise ValidationError(f"sentence index {idx} outside 0..{self.n - 1}")
        return tuple(w.window_index for w in self.windows
                     if w.start <= idx < w.stop)


def build_spm_contexts(conv: Conversation, h: int = DEFAULT_H,
                       k: int = DEFAULT_K) -> list[SpmContext]:
    """One prediction context per change point.

    The context for point p spans sentences [p+1-h, p+1+k] intersected
    with the conversation (truncated at the edges), so it always contains
    the pair (p, p+1). Returns an empty list for single-sentence
    conversations (nothing to predict).
    """
    if h < 1:
        raise ConfigError(f"front context h must be >= 1, got {h}")
    if k < 0:
        raise ConfigError(f"back context k must be >= 0, got {k}")
    n = len(conv)
    contexts = []
    for p in range(n - 1):
        start = max(0, p + 1 - h)
        stop = min(n, p + 2 + k)
        contexts.append(SpmContext(
            change_index=p,
            sentences=conv.sentences[start:stop],
            boundary_offset=p - start,
            h=h,
            k=k,
        ))
    return contexts


def build_mpm_windows(n: int, window_len: int = DEFAULT_WINDOW_LEN,
                      stride: int = DEFAULT_STRIDE) -> WindowSet:
    """Sliding windows of ``window_len`` sentences, ``stride`` apart.

    Windows start at sentence 0. The final window is anchored to end at
    the last sentence (added even when that breaks the stride) so every
    change point is covered. A conversation no longer than the window
    yields a single window equal to the whole conversation.
    """
    if window_len < 2:
        raise ConfigError(f"window length must be >= 2, got {window_len}")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    # stride >= window_len leaves the boundary between adjacent windows
    # with no vote and later stages with no overlap to match labels on
    if stride >= window_len:
        raise ConfigError(
            f"stride {stride} must be smaller than window length "
            f"{window_len} so adjacent windows overlap")
    if n < 2:
        return WindowSet(n=n, windows=(), coverage_map={})

    spans: list[tuple[int, int]] = []
    if n <= window_len:
        spans.append((0, n))
    else:
        start = 0
        while start + window_len <= n:
            spans.append((start, start + window_len))
            start += stride
        if spans[-1][1] < n:
            spans.append((n - window_len, n))

    windows = tuple(MpmWindow(i, a, b) for i, (a, b) in enumerate(spans))
    coverage: dict[int, tuple[int, ...]] = {p: () for p in range(n - 1)}
    for w in windows:
        for p in w.change_points:
            coverage[p] = coverage[p] + (w.window_index,)
    return WindowSet(n=n, windows=windows, coverage_map=coverage)


def windows_for_conversation(conv: Conversation,
                             window_len: int = DEFAULT_WINDOW_LEN,
                             stride: int = DEFAULT_STRIDE) -> WindowSet:
    return build_mpm_windows(len(conv), window_len, stride)
