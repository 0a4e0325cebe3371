"""Word-level diarization error metrics and corpus reporting.

WDER counts words attributed to the wrong speaker after the best possible
relabeling of predicted speakers (label names are arbitrary, so scoring
first finds the permutation that most flatters the prediction). WDER-S
reweights per-conversation WDER by sentence count. Corpus reports carry
both a word-pooled overall and a conversation-averaged overall (they
answer different questions, so both are emitted and labeled) plus
length-bucketed breakdowns by conversation minutes (with the binary
<=15 / >15 minute split) or by sentence count when no timing exists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._assignment import DEFAULT_EXHAUSTIVE_LIMIT, best_permutation
from .errors import ConfigError, ValidationError
from .transcript import Conversation, derive_change_sequence

MAX_MAPPING_LABELS = 12

DEFAULT_MINUTE_EDGES = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
DEFAULT_SENTENCE_EDGES = (0.0, 20.0, 40.0, 60.0, 80.0, 100.0)
SPLIT_POINT_MINUTES = 15.0

BUCKET_MODES = ("minutes", "sentences")


def word_labels(conv: Conversation) -> tuple[str, ...]:
    """Per-word speaker labels, expanded from sentence labels."""
    out: list[str] = []
    for s in conv.sentences:
        if s.speaker is None:
            raise ValidationError(
                f"conversation {conv.id!r}: sentence {s.index} has no speaker")
        out.extend([s.speaker] * len(s.words))
    return tuple(out)


def optimal_speaker_mapping(ref_labels: Sequence[str],
                            hyp_labels: Sequence[str],
                            exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT
                            ) -> dict[str, str]:
    """Relabeling of hypothesis speakers that minimizes word mismatches.

    Returns {hyp label: ref label} over the union of both label sets
    (so it is a permutation: injective, exhaustive). Up to
    ``exhaustive_limit`` labels all permutations are tried in
    lexicographic order (deterministic ties); larger sets use the
    assignment solver.
    """
    if len(ref_labels) != len(hyp_labels):
        raise ValidationError(
            f"label sequences differ in length: {len(ref_labels)} vs "
            f"{len(hyp_labels)}")
    labels = sorted(set(ref_labels) | set(hyp_labels))
    if len(labels) > MAX_MAPPING_LABELS:
        raise ValidationError(
            f"{len(labels)} distinct labels exceed the mapping limit "
            f"({MAX_MAPPING_LABELS})")
    if not labels:
        return {}
    index = {lab: i for i, lab in enumerate(labels)}
    u = len(labels)
    confusion = np.zeros((u, u))
    for r, h in zip(ref_labels, hyp_labels):
        confusion[index[r], index[h]] += 1.0
    # Orient rows as hyp labels so perm[h] names the ref label h becomes.
    perm = best_permutation(confusion.T, exhaustive_limit)
    return {labels[h]: labels[perm[h]] for h in range(u)}


def wder(ref_labels: Sequence[str], hyp_labels: Sequence[str],
         exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT) -> float:
    """Fraction of words on the wrong speaker after optimal relabeling."""
    errors, total = _mapped_errors(ref_labels, hyp_labels, exhaustive_limit)
    if total == 0:
        return 0.0
    return errors / total


def _mapped_errors(ref_labels, hyp_labels, exhaustive_limit):
    if len(ref_labels) == 0:
        return 0, 0
    mapping = optimal_speaker_mapping(ref_labels, hyp_labels, exhaustive_limit)
    errors = sum(1 for r, h in zip(ref_labels, hyp_labels) if mapping[h] != r)
    return errors, len(ref_labels)


@dataclass(frozen=True)
class ConversationScore:
    """Per-conversation WDER ingredients."""

    conversation_id: str
    word_errors: int
    word_total: int
    wder: float
    n_sentences: int
    minutes: float | None = None
    zero_words: bool = False

    def __post_init__(self):
        if not 0.0 <= self.wder <= 1.0:
            raise ValidationError(f"wder {self.wder} outside [0, 1]")


def score_conversation(conversation_id: str, ref_labels: Sequence[str],
                       hyp_labels: Sequence[str], n_sentences: int,
                       minutes: float | None = None,
                       exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT
                       ) -> ConversationScore:
    """WDER for one conversation's word-label sequences."""
    errors, total = _mapped_errors(ref_labels, hyp_labels, exhaustive_limit)
    if total == 0:
        return ConversationScore(conversation_id, 0, 0, 0.0, n_sentences,
                                 minutes, zero_words=True)
    return ConversationScore(conversation_id, errors, total, errors / total,
                             n_sentences, minutes)


def score_pair(ref_conv: Conversation, hyp_conv: Conversation,
               exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT
               ) -> ConversationScore:
    """Score a predicted conversation against its reference.

    Both must carry speakers and have identical word counts (predictions
    are made on the reference transcript's own sentences; transcripts
    with diverging text must go through alignment first).
    """
    if ref_conv.id != hyp_conv.id:
        raise ValidationError(
            f"conversation ids differ: {ref_conv.id!r} vs {hyp_conv.id!r}")
    ref = word_labels(ref_conv)
    hyp = word_labels(hyp_conv)
    if len(ref) != len(hyp):
        raise ValidationError(
            f"conversation {ref_conv.id!r}: word counts differ ({len(ref)} vs "
            f"{len(hyp)}); align transcripts before evaluating")
    minutes = None
    duration = ref_conv.duration_seconds()
    if duration is not None:
        minutes = duration / 60.0
    return score_conversation(ref_conv.id, ref, hyp, len(ref_conv), minutes,
                              exhaustive_limit)


def wder_s(scores: Sequence[ConversationScore]) -> float:
    """Sentence-count-weighted mean of per-conversation WDER."""
    if not scores:
        raise ValidationError("cannot compute WDER-S of an empty corpus")
    total_sentences = sum(s.n_sentences for s in scores)
    if total_sentences == 0:
        raise ValidationError("corpus contains no sentences")
    return sum(s.n_sentences * s.wder for s in scores) / total_sentences


@dataclass(frozen=True)
class BucketScore:
    """Pooled metrics over the conversations falling in one length range."""

    label: str
    lower: float
    upper: float | None
    conversation_ids: tuple[str, ...]
    word_errors: int
    word_total: int
    wder: float | None
    wder_s: float | None


def _pool(label: str, lower: float, upper: float | None,
          members: Sequence[ConversationScore]) -> BucketScore:
    errors = sum(s.word_errors for s in members)
    total = sum(s.word_total for s in members)
    pooled = errors / total if total else None
    weighted = wder_s(members) if members else None
    return BucketScore(label, lower, upper,
                       tuple(s.conversation_id for s in members),
                       errors, total, pooled, weighted)


def _bucket_value(score: ConversationScore, mode: str) -> float:
    if mode == "minutes":
        if score.minutes is None:
            raise ConfigError(
                f"conversation {score.conversation_id!r} has no duration; "
                f"use sentence buckets instead")
        return score.minutes
    return float(score.n_sentences)


def bucket_report(scores: Sequence[ConversationScore], mode: str = "minutes",
                  edges: Sequence[float] | None = None
                  ) -> tuple[tuple[BucketScore, ...], tuple[BucketScore, ...]]:
    """Length-bucketed scores plus (in minutes mode) the binary split.

    Buckets are [edge_i, edge_i+1) with a final unbounded [last_edge, inf)
    bucket, so they partition the corpus. The split pools conversations
    at most / strictly above 15 minutes.
    """
    if mode not in BUCKET_MODES:
        raise ConfigError(f"unknown bucket mode {mode!r}; expected one of "
                          f"{BUCKET_MODES}")
    if edges is None:
        edges = DEFAULT_MINUTE_EDGES if mode == "minutes" \
            else DEFAULT_SENTENCE_EDGES
    edges = tuple(float(e) for e in edges)
    if len(edges) < 1 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ConfigError("bucket edges must be strictly increasing")
    unit = "min" if mode == "minutes" else "sent"
    values = [(s, _bucket_value(s, mode)) for s in scores]
    buckets = []
    bounds = list(zip(edges, edges[1:])) + [(edges[-1], None)]
    for lower, upper in bounds:
        if upper is None:
            members = [s for s, v in values if v >= lower]
            label = f">={_fmt_edge(lower)} {unit}"
        else:
            members = [s for s, v in values if lower <= v < upper]
            label = f"[{_fmt_edge(lower)},{_fmt_edge(upper)}) {unit}"
        buckets.append(_pool(label, lower, upper, members))
    split = ()
    if mode == "minutes":
        low = [s for s, v in values if v <= SPLIT_POINT_MINUTES]
        high = [s for s, v in values if v > SPLIT_POINT_MINUTES]
        split = (
            _pool(f"<={_fmt_edge(SPLIT_POINT_MINUTES)} {unit}", 0.0,
                  SPLIT_POINT_MINUTES, low),
            _pool(f">{_fmt_edge(SPLIT_POINT_MINUTES)} {unit}",
                  SPLIT_POINT_MINUTES, None, high),
        )
    return tuple(buckets), split


def _fmt_edge(e: float) -> str:
    return str(int(e)) if float(e).is_integer() else f"{e:g}"


@dataclass(frozen=True)
class WderReport:
    """Corpus evaluation: per-conversation scores plus overall and
    bucketed summaries."""

    scores: tuple[ConversationScore, ...]
    pooled_wder: float
    macro_wder: float
    wder_s: float
    bucket_mode: str | None
    buckets: tuple[BucketScore, ...]
    split: tuple[BucketScore, ...]


def build_report(scores: Sequence[ConversationScore],
                 bucket_mode: str | None = None,
                 edges: Sequence[float] | None = None) -> WderReport:
    """Reduce per-conversation scores to a corpus report."""
    scores = tuple(scores)
    if not scores:
        raise ValidationError("cannot report on an empty corpus")
    errors = sum(s.word_errors for s in scores)
    total = sum(s.word_total for s in scores)
    pooled = errors / total if total else 0.0
    macro = sum(s.wder for s in scores) / len(scores)
    weighted = wder_s(scores)
    buckets: tuple[BucketScore, ...] = ()
    split: tuple[BucketScore, ...] = ()
    if bucket_mode is not None:
        buckets, split = bucket_report(scores, bucket_mode, edges)
    return WderReport(scores, pooled, macro, weighted, bucket_mode, buckets,
                      split)


def evaluate_pairs(pairs: Sequence[tuple[Conversation, Conversation]],
                   bucket_mode: str | None = None,
                   edges: Sequence[float] | None = None,
                   exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT
                   ) -> WderReport:
    """Score (reference, hypothesis) conversation pairs and reduce."""
    scores = [score_pair(ref, hyp, exhaustive_limit) for ref, hyp in pairs]
    return build_report(scores, bucket_mode, edges)


# ---------------------------------------------------------------------------
# Error-slice export
# ---------------------------------------------------------------------------

def export_errors(pairs: Sequence[tuple[Conversation, Conversation]],
                  radius: int = 2, sample: int | None = None,
                  seed: int = 0) -> list[dict]:
    """Context slices around every wrongly predicted change decision.

    Each slice covers sentences [p - radius, p + radius] around the
    boundary after sentence p, with gold and predicted speakers side by
    side. ``sample`` keeps a seeded random subset (order preserved).
    """
    if radius < 1:
        raise ConfigError(f"radius must be >= 1, got {radius}")
    slices = []
    for ref_conv, hyp_conv in pairs:
        if ref_conv.id != hyp_conv.id or len(ref_conv) != len(hyp_conv):
            raise ValidationError(
                f"mismatched pair for conversation {ref_conv.id!r}")
        gold_speakers = ref_conv.speakers
        pred_speakers = hyp_conv.speakers
        if gold_speakers is None or pred_speakers is None:
            raise ValidationError(
                f"conversation {ref_conv.id!r}: both sides need speakers")
        gold = derive_change_sequence(gold_speakers).decisions
        pred = derive_change_sequence(pred_speakers).decisions
        for p, (g, d) in enumerate(zip(gold, pred)):
            if g == d:
                continue
            lo = max(0, p - radius)
            hi = min(len(ref_conv) - 1, p + radius)
            slices.append({
                "conversation_id": ref_conv.id,
                "change_index": p,
                "gold_change": int(g),
                "predicted_change": int(d),
                "sentences": [
                    {
                        "index": i,
                        "text": ref_conv.sentences[i].text,
                        "gold_speaker": gold_speakers.labels[i],
                        "predicted_speaker": pred_speakers.labels[i],
                    }
                    for i in range(lo, hi + 1)
                ],
            })
    if sample is not None and 0 <= sample < len(slices):
        rng = np.random.default_rng(seed)
        keep = sorted(rng.choice(len(slices), size=sample, replace=False))
        slices = [slices[int(i)] for i in keep]
    return slices


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------

def _bucket_dict(b: BucketScore) -> dict:
    return {
        "label": b.label,
        "lower": b.lower,
        "upper": b.upper,
        "conversations": len(b.conversation_ids),
        "word_errors": b.word_errors,
        "word_total": b.word_total,
        "wder": b.wder,
        "wder_s": b.wder_s,
    }


def report_to_dict(report: WderReport) -> dict:
    return {
        "overall": {
            "wder_pooled": report.pooled_wder,
            "wder_macro": report.macro_wder,
            "wder_s": report.wder_s,
            "conversations": len(report.scores),
            "word_errors": sum(s.word_errors for s in report.scores),
            "word_total": sum(s.word_total for s in report.scores),
        },
        "bucket_mode": report.bucket_mode,
        "buckets": [_bucket_dict(b) for b in report.buckets],
        "split": [_bucket_dict(b) for b in report.split],
        "conversations": [
            {
                "id": s.conversation_id,
                "word_errors": s.word_errors,
                "word_total": s.word_total,
                "wder": s.wder,
                "n_sentences": s.n_sentences,
                "minutes": s.minutes,
                "zero_words": s.zero_words,
            }
            for s in report.scores
        ],
    }


def write_report(report: WderReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_bucket_series(report: WderReport, path: str | Path) -> None:
    """One JSON record per bucket, for external plotting."""
    with open(path, "w", encoding="utf-8") as fh:
        for b in report.buckets:
            fh.write(json.dumps(_bucket_dict(b), sort_keys=True) + "\n")


def _fmt_metric(v: float | None) -> str:
    return "-" if v is None else f"{v:.4f}"


def format_report_table(report: WderReport) -> str:
    """Aligned plain-text summary: one row per split/bucket plus overall."""
    rows = [("", "WDER", "WDER-S", "Words", "Convs")]
    for b in report.split:
        rows.append((b.label, _fmt_metric(b.wder), _fmt_metric(b.wder_s),
                     str(b.word_total), str(len(b.conversation_ids))))
    for b in report.buckets:
        rows.append((b.label, _fmt_metric(b.wder), _fmt_metric(b.wder_s),
                     str(b.word_total), str(len(b.conversation_ids))))
    total_words = sum(s.word_total for s in report.scores)
    rows.append(("Overall (pooled)", _fmt_metric(report.pooled_wder),
                 _fmt_metric(report.wder_s), str(total_words),
                 str(len(report.scores))))
    rows.append(("Overall (macro)", _fmt_metric(report.macro_wder), "-",
                 str(total_words), str(len(report.scores))))
    widths = [max(len(r[c]) for r in rows) for c in range(5)]
    lines = []
    for r in rows:
        cells = [r[0].ljust(widths[0])]
        cells += [r[c].rjust(widths[c]) for c in range(1, 5)]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines)
