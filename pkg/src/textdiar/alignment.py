"""Word-level alignment between a speaker-tagged reference transcript and
an untagged hypothesis transcript, with speaker-label transfer.

The pipeline: flatten both transcripts to word streams, align them with
global dynamic programming (match +2, substitution -1, gap -1 by
default), copy each aligned reference word's speaker onto its hypothesis
word, fill inserted hypothesis words from their nearest labeled neighbor,
then label each hypothesis sentence by majority over its words. The
output is a hypothesis transcript carrying sentence-level speakers, the
same schema as any other transcript, ready for training or evaluation.

Matching compares normalized tokens (lowercased, outer punctuation
stripped); tokens that normalize to nothing are excluded from scoring but
still appear in the alignment as gap columns so label transfer covers
every word.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import TB_DIAG, TB_LEFT, TB_UP, nw_fill, nw_fill_numpy
from .errors import ConfigError, ValidationError
from .transcript import Conversation, SpeakerAssignment

MATCH = "match"
SUBSTITUTION = "substitution"
REF_GAP = "ref_gap"
HYP_GAP = "hyp_gap"

_OUTER_PUNCT = re.compile(r"^[^\w]+|[^\w]+$")


def normalize_token(word: str) -> str:
    """Lowercase and strip leading/trailing punctuation.

    Internal characters (apostrophes included) are preserved; a token
    that is pure punctuation normalizes to the empty string.
    """
    return _OUTER_PUNCT.sub("", word.lower())


@dataclass(frozen=True)
class AlignmentScores:
    """Scoring for the global alignment.

    Defaults make one substitution (-1) cheaper than an insert-delete
    pair (-2), which matches how recognition errors usually look.
    """

    match: float = 2.0
    substitution: float = -1.0
    gap: float = -1.0


@dataclass(frozen=True)
class TokenStream:
    """A transcript flattened to words.

    Each word remembers its source sentence; reference streams also carry
    the per-word speaker.
    """

    words: tuple[str, ...]
    sentence_indices: tuple[int, ...]
    speakers: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.sentence_indices) != len(self.words):
            raise ValidationError("one sentence index per word required")
        if self.speakers is not None and len(self.speakers) != len(self.words):
            raise ValidationError("one speaker per word required")

    def __len__(self) -> int:
        return len(self.words)

    @property
    def normalized(self) -> tuple[str, ...]:
        return tuple(normalize_token(w) for w in self.words)

    @classmethod
    def from_conversation(cls, conv: Conversation,
                          with_speakers: bool = False) -> "TokenStream":
        words: list[str] = []
        sentence_indices: list[int] = []
        speakers: list[str] = []
        for s in conv.sentences:
            for w in s.words:
                words.append(w)
                sentence_indices.append(s.index)
                if with_speakers:
                    if s.speaker is None:
                        raise ValidationError(
                            f"conversation {conv.id!r}: sentence {s.index} "
                            f"has no speaker label")
                    speakers.append(s.speaker)
        return cls(tuple(words), tuple(sentence_indices),
                   tuple(speakers) if with_speakers else None)


@dataclass(frozen=True)
class AlignmentColumn:
    """One column of a word alignment.

    match/substitution consume one word from each stream; hyp_gap
    consumes only a reference word (deletion), ref_gap only a hypothesis
    word (insertion).
    """

    kind: str
    ref_index: int | None
    hyp_index: int | None

    def __post_init__(self):
        if self.kind in (MATCH, SUBSTITUTION):
            ok = self.ref_index is not None and self.hyp_index is not None
        elif self.kind == HYP_GAP:
            ok = self.ref_index is not None and self.hyp_index is None
        elif self.kind == REF_GAP:
            ok = self.ref_index is None and self.hyp_index is not None
        else:
            raise ValidationError(f"unknown column kind {self.kind!r}")
        if not ok:
            raise ValidationError(
                f"{self.kind} column with ref={self.ref_index} "
                f"hyp={self.hyp_index}")


@dataclass(frozen=True)
class WordAlignment:
    """Ordered alignment columns covering every word of both streams."""

    columns: tuple[AlignmentColumn, ...]
    score: float

    def __post_init__(self):
        prev_ref = -1
        prev_hyp = -1
        for col in self.columns:
            if col.ref_index is not None:
                if col.ref_index <= prev_ref:
                    raise ValidationError("ref indices must strictly increase")
                prev_ref = col.ref_index
            if col.hyp_index is not None:
                if col.hyp_index <= prev_hyp:
                    raise ValidationError("hyp indices must strictly increase")
                prev_hyp = col.hyp_index

    def counts(self) -> dict[str, int]:
        out = {MATCH: 0, SUBSTITUTION: 0, REF_GAP: 0, HYP_GAP: 0}
        for col in self.columns:
            out[col.kind] += 1
        return out


def _token_ids(ref_tokens: Sequence[str], hyp_tokens: Sequence[str]):
    """Intern normalized tokens so the DP compares integers."""
    vocab: dict[str, int] = {}
    def ids(tokens):
        out = np.empty(len(tokens), dtype=np.int64)
        for i, t in enumerate(tokens):
            out[i] = vocab.setdefault(t, len(vocab))
        return out
    return ids(ref_tokens), ids(hyp_tokens)


def _banded_fill(ref_ids, hyp_ids, match, sub, gap, band: int):
    """Anti-diagonal fill restricted to |i - j| <= band.

    Cells outside the band hold -inf so in-band cells never route through
    them; optimality is guaranteed only when the true path stays in band.
    """
    n = ref_ids.shape[0]
    m = hyp_ids.shape[0]
    neg = -np.inf
    score = np.full((n + 1, m + 1), neg)
    tb = np.zeros((n + 1, m + 1), dtype=np.uint8)
    width = min(band, m)
    score[0, :width + 1] = gap * np.arange(width + 1)
    tb[0, :] = TB_LEFT
    rows = min(band, n)
    score[1:rows + 1, 0] = gap * np.arange(1, rows + 1)
    tb[1:, 0] = TB_UP
    for d in range(2, n + m + 1):
        lo = max(1, d - m, -((band - d) // 2))  # ceil((d - band) / 2)
        hi = min(n, d - 1, (d + band) // 2)
        if lo > hi:
            continue
        i = np.arange(lo, hi + 1)
        j = d - i
        pair = np.where(ref_ids[i - 1] == hyp_ids[j - 1], match, sub)
        with np.errstate(invalid="ignore"):
            c_diag = score[i - 1, j - 1] + pair
            c_up = score[i - 1, j] + gap
            c_left = score[i, j - 1] + gap
        best = np.maximum(np.maximum(c_diag, c_up), c_left)
        ptr = np.where(c_diag == best, TB_DIAG,
                       np.where(c_up == best, TB_UP, TB_LEFT)).astype(np.uint8)
        score[i, j] = best
        tb[i, j] = ptr
    if not np.isfinite(score[n, m]):
        raise ConfigError(
            f"band width {band} cannot connect streams of lengths {n} and {m}")
    return score, tb


def _traceback(tb, ref_positions, hyp_positions, ref_norm, hyp_norm):
    """Walk pointers from the bottom-right corner back to the origin.

    Positions map DP coordinates (over scored tokens) back to original
    word indices.
    """
    cols = []
    i = len(ref_positions)
    j = len(hyp_positions)
    while i > 0 or j > 0:
        move = tb[i, j]
        if move == TB_DIAG and i > 0 and j > 0:
            ri = ref_positions[i - 1]
            hj = hyp_positions[j - 1]
            kind = MATCH if ref_norm[ri] == hyp_norm[hj] else SUBSTITUTION
            cols.append(AlignmentColumn(kind, ri, hj))
            i -= 1
            j -= 1
        elif move == TB_UP and i > 0:
            cols.append(AlignmentColumn(HYP_GAP, ref_positions[i - 1], None))
            i -= 1
        else:
            cols.append(AlignmentColumn(REF_GAP, None, hyp_positions[j - 1]))
            j -= 1
    cols.reverse()
    return cols


def _splice_unscored(cols, ref_len, hyp_len, ref_scored, hyp_scored):
    """Re-insert words that were excluded from scoring as gap columns, so
    the alignment covers every original word exactly once."""
    ref_dropped = sorted(set(range(ref_len)) - set(ref_scored))
    hyp_dropped = sorted(set(range(hyp_len)) - set(hyp_scored))
    if not ref_dropped and not hyp_dropped:
        return cols
    out = []
    ri = iter(ref_dropped)
    hi = iter(hyp_dropped)
    next_ref = next(ri, None)
    next_hyp = next(hi, None)
    for col in cols:
        while next_ref is not None and col.ref_index is not None \
                and next_ref < col.ref_index:
            out.append(AlignmentColumn(HYP_GAP, next_ref, None))
            next_ref = next(ri, None)
        while next_hyp is not None and col.hyp_index is not None \
                and next_hyp < col.hyp_index:
            out.append(AlignmentColumn(REF_GAP, None, next_hyp))
            next_hyp = next(hi, None)
        out.append(col)
    while next_ref is not None:
        out.append(AlignmentColumn(HYP_GAP, next_ref, None))
        next_ref = next(ri, None)
    while next_hyp is not None:
        out.append(AlignmentColumn(REF_GAP, None, next_hyp))
        next_hyp = next(hi, None)
    return out


def align_words(ref: TokenStream, hyp: TokenStream,
                scores: AlignmentScores = AlignmentScores(),
                band: int | None = None) -> WordAlignment:
    """Optimal global alignment of two word streams.

    Ties prefer match/substitution over consuming a reference word over
    consuming a hypothesis word, so results are reproducible. ``band``
    restricts the search to |ref_pos - hyp_pos| <= band (faster for long
    near-parallel streams, exact only when the optimum stays in band).
    """
    if len(ref) == 0 or len(hyp) == 0:
        raise ValidationError("both token streams must be non-empty")
    ref_norm = ref.normalized
    hyp_norm = hyp.normalized
    ref_scored = [i for i, t in enumerate(ref_norm) if t]
    hyp_scored = [i for i, t in enumerate(hyp_norm) if t]
    ref_ids, hyp_ids = _token_ids([ref_norm[i] for i in ref_scored],
                                  [hyp_norm[i] for i in hyp_scored])
    if band is not None:
        if band < 1:
            raise ConfigError(f"band width must be >= 1, got {band}")
        score, tb = _banded_fill(ref_ids, hyp_ids, scores.match,
                                 scores.substitution, scores.gap, band)
    elif len(ref_ids) == 0 or len(hyp_ids) == 0:
        # Kernel-free degenerate case: everything aligns against gaps.
        score, tb = nw_fill_numpy(ref_ids, hyp_ids, scores.match,
                                  scores.substitution, scores.gap)
    else:
        score, tb = nw_fill(ref_ids, hyp_ids, scores.match,
                            scores.substitution, scores.gap)
    cols = _traceback(tb, ref_scored, hyp_scored, ref_norm, hyp_norm)
    cols = _splice_unscored(cols, len(ref), len(hyp), ref_scored, hyp_scored)
    return WordAlignment(tuple(cols),
                         float(score[len(ref_ids), len(hyp_ids)]))


def transfer_speakers(alignment: WordAlignment, ref: TokenStream,
                      hyp_len: int) -> tuple[str, ...]:
    """Speaker label for every hypothesis word.

    Matched and substituted words take their aligned reference word's
    speaker; inserted words take the nearest labeled neighbor's label,
    the left one when equidistant.
    """
    if ref.speakers is None:
        raise ValidationError("reference stream carries no speaker labels")
    labels: list[str | None] = [None] * hyp_len
    for col in alignment.columns:
        if col.kind in (MATCH, SUBSTITUTION):
            labels[col.hyp_index] = ref.speakers[col.ref_index]
    if not any(lab is not None for lab in labels):
        raise ValidationError(
            "alignment anchored no hypothesis words; cannot transfer labels")
    for j in range(hyp_len):
        if labels[j] is not None:
            continue
        for dist in range(1, hyp_len):
            left = j - dist
            right = j + dist
            if left >= 0 and labels[left] is not None:
                labels[j] = labels[left]
                break
            if right < hyp_len and labels[right] is not None:
                labels[j] = labels[right]
                break
    return tuple(labels)


def label_sentences(word_labels: Sequence[str],
                    sentence_indices: Sequence[int],
                    n_sentences: int) -> SpeakerAssignment:
    """Sentence labels by majority over word labels.

    A tied sentence takes the previous sentence's label when that label
    is among the tied candidates (the lexicographically lowest candidate
    otherwise, which also covers a tie on the first sentence).
    """
    if len(word_labels) != len(sentence_indices):
        raise ValidationError("one sentence index per word label required")
    counts: list[dict[str, int]] = [dict() for _ in range(n_sentences)]
    for lab, idx in zip(word_labels, sentence_indices):
        if not 0 <= idx < n_sentences:
            raise ValidationError(f"sentence index {idx} out of range")
        counts[idx][lab] = counts[idx].get(lab, 0) + 1
    labels: list[str] = []
    for i in range(n_sentences):
        if not counts[i]:
            if labels:
                labels.append(labels[-1])
            elif word_labels:
                labels.append(min(set(word_labels)))
            else:
                raise ValidationError("no labeled words to vote with")
            continue
        top = max(counts[i].values())
        candidates = sorted(lab for lab, c in counts[i].items() if c == top)
        if len(candidates) > 1 and labels and labels[-1] in candidates:
            labels.append(labels[-1])
        else:
            labels.append(candidates[0])
    return SpeakerAssignment(tuple(labels))


def align_and_label(ref_conv: Conversation, hyp_conv: Conversation,
                    scores: AlignmentScores = AlignmentScores(),
                    band: int | None = None) -> Conversation:
    """Full transfer pipeline: returns the hypothesis conversation with
    sentence-level speakers copied over from the reference."""
    ref = TokenStream.from_conversation(ref_conv, with_speakers=True)
    hyp = TokenStream.from_conversation(hyp_conv)
    alignment = align_words(ref, hyp, scores, band)
    word_labels = transfer_speakers(alignment, ref, len(hyp))
    assignment = label_sentences(word_labels, hyp.sentence_indices,
                                 len(hyp_conv))
    return hyp_conv.with_speakers(assignment)
