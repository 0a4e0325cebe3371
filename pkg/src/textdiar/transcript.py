"""Conversation data model and speaker/change-sequence conversions.

A conversation is an ordered list of sentences; diarization output is a
per-sentence speaker assignment, which for two speakers is equivalent to
a binary change sequence over the n-1 sentence boundaries. This module
holds those types, the conversions between them, the newline-delimited
transcript file format, and a rule-based sentence segmenter.

All types are immutable after construction and safe to share across
concurrent workers.
"""

from __future__ import annotations

import io
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

from .errors import ParseError, ValidationError

# Canonical two-speaker label pair used when decoding change sequences.
CANONICAL_LABELS = ("A", "B")


@dataclass(frozen=True)
class Sentence:
    """One sentence of a conversation.

    Attributes:
        index: 0-based ordinal within the conversation.
        text: sentence text; must contain a non-whitespace character.
        speaker: optional speaker label (gold or predicted).
        start_time: optional start offset in seconds.
        end_time: optional end offset in seconds.
    """

    index: int
    text: str
    speaker: str | None = None
    start_time: float | None = None
    end_time: float | None = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValidationError(f"sentence {self.index}: text is empty")
        if self.index < 0:
            raise ValidationError(f"sentence index {self.index} is negative")
        for name in ("start_time", "end_time"):
            t = getattr(self, name)
            if t is not None and t < 0:
                raise ValidationError(f"sentence {self.index}: {name} < 0")
        if (self.start_time is not None and self.end_time is not None
                and self.start_time > self.end_time):
            raise ValidationError(
                f"sentence {self.index}: start_time > end_time")

    @property
    def words(self) -> list[str]:
        """Whitespace tokens of the sentence text."""
        return self.text.split()


@dataclass(frozen=True)
class Conversation:
    """Ordered sentence sequence with an id and optional total duration."""

    id: str
    sentences: tuple[Sentence, ...]
    duration: float | None = None

    def __post_init__(self):
        if not self.sentences:
            raise ValidationError(f"conversation {self.id!r}: no sentences")
        for pos, s in enumerate(self.sentences):
            if s.index != pos:
                raise ValidationError(
                    f"conversation {self.id!r}: sentence index {s.index} "
                    f"at position {pos} (indices must be 0..n-1 in order)")
        object.__setattr__(self, "sentences", tuple(self.sentences))

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def speakers(self) -> "SpeakerAssignment | None":
        """Gold speaker assignment, if every sentence carries a label."""
        labels = [s.speaker for s in self.sentences]
        if any(l is None for l in labels):
            return None
        return SpeakerAssignment(tuple(labels))

    def duration_seconds(self) -> float | None:
        """Explicit duration, else the span of available timestamps."""
        if self.duration is not None:
            return self.duration
        starts = [s.start_time for s in self.sentences if s.start_time is not None]
        ends = [s.end_time for s in self.sentences if s.end_time is not None]
        if not starts or not ends:
            return None
        return max(ends) - min(starts)

    def with_speakers(self, assignment: "SpeakerAssignment") -> "Conversation":
        """Copy of this conversation with speaker labels replaced."""
        if len(assignment.labels) != len(self.sentences):
            raise ValidationError(
                f"conversation {self.id!r}: {len(assignment.labels)} labels "
                f"for {len(self.sentences)} sentences")
        sentences = tuple(
            Sentence(s.index, s.text, lab, s.start_time, s.end_time)
            for s, lab in zip(self.sentences, assignment.labels))
        return Conversation(self.id, sentences, self.duration)


@dataclass(frozen=True)
class SpeakerAssignment:
    """Per-sentence speaker labels for one conversation."""

    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.labels:
            raise ValidationError("speaker assignment is empty")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def label_set(self) -> frozenset[str]:
        return frozenset(self.labels)


@dataclass(frozen=True)
class ChangeSequence:
    """Binary speaker-change decisions over the n-1 sentence boundaries.

    ``decisions[p]`` is 1 iff the speaker changes between sentence p and
    p+1 (0-based). ``probabilities`` optionally carries the underlying
    change probabilities, same length.
    """

    decisions: tuple[int, ...]
    probabilities: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "decisions", tuple(int(d) for d in self.decisions))
        for d in self.decisions:
            if d not in (0, 1):
                raise ValidationError(f"change decision {d} not in {{0, 1}}")
        if self.probabilities is not None:
            probs = tuple(float(p) for p in self.probabilities)
            object.__setattr__(self, "probabilities", probs)
            if len(probs) != len(self.decisions):
                raise ValidationError(
                    f"{len(probs)} probabilities for {len(self.decisions)} decisions")
            for p in probs:
                if not 0.0 <= p <= 1.0:
                    raise ValidationError(f"probability {p} outside [0, 1]")

    def __len__(self) -> int:
        return len(self.decisions)


def derive_change_sequence(assignment: SpeakerAssignment) -> ChangeSequence:
    """Change decisions implied by a speaker assignment.

    decisions[p] = 1 iff labels[p] != labels[p+1]; empty for a
    single-sentence conversation.
    """
    labels = assignment.labels
    return ChangeSequence(tuple(
        1 if labels[p] != labels[p + 1] else 0 for p in range(len(labels) - 1)))


def decode_speakers(changes: ChangeSequence, initial: str,
                    other: str | None = None) -> SpeakerAssignment:
    """Speaker assignment implied by a change sequence (2-speaker setting).

    The first sentence takes ``initial``; each decision of 1 flips to the
    other label. ``other`` defaults to the canonical partner of ``initial``
    ("A" <-> "B").

    Inverse of derive_change_sequence: for any 2-label assignment ``a``,
    ``decode_speakers(derive_change_sequence(a), a.labels[0], other)``
    reproduces ``a``.
    """
    if other is None:
        other = CANONICAL_LABELS[1] if initial == CANONICAL_LABELS[0] else CANONICAL_LABELS[0]
    if other == initial:
        raise ValidationError("decode_speakers needs two distinct labels")
    labels = [initial]
    for d in changes.decisions:
        prev = labels[-1]
        labels.append((other if prev == initial else initial) if d else prev)
    return SpeakerAssignment(tuple(labels))


_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def segment_sentences(raw_text: str) -> list[str]:
    """Split raw text into sentences on terminal punctuation.

    A boundary is a '.', '!' or '?' followed by whitespace; the punctuation
    stays with its sentence and segments are stripped. Intra-token
    punctuation ("3:40", "e.g.x") never splits because no whitespace
    follows it. Never returns empty segments.
    """
    if not raw_text or not raw_text.strip():
        raise ValidationError("cannot segment all-whitespace text")
    segments = [seg.strip() for seg in _SENTENCE_SPLIT.split(raw_text)]
    return [seg for seg in segments if seg]


# ---------------------------------------------------------------------------
# Transcript file format: one JSON object per line, one conversation each:
# {"id": str, "sentences": [{"index": int, "text": str, "speaker": str|null,
#  "start_time": number|null, "end_time": number|null}]}
# Unknown fields are ignored. An optional top-level "duration" (seconds)
# is read and written when present.
# ---------------------------------------------------------------------------

def _sentence_from_record(obj: dict, line: int, pos: int) -> Sentence:
    for required in ("index", "text"):
        if required not in obj:
            raise ParseError(f"sentence {pos}: missing field {required!r}", line)
    if not isinstance(obj["text"], str):
        raise ParseError(f"sentence {pos}: 'text' is not a string", line)
    if not isinstance(obj["index"], int) or isinstance(obj["index"], bool):
        raise ParseError(f"sentence {pos}: 'index' is not an integer", line)
    speaker = obj.get("speaker")
    if speaker is not None and not isinstance(speaker, str):
        raise ParseError(f"sentence {pos}: 'speaker' is not a string", line)
    times = {}
    for name in ("start_time", "end_time"):
        t = obj.get(name)
        if t is not None and not isinstance(t, (int, float)):
            raise ParseError(f"sentence {pos}: {name!r} is not a number", line)
        times[name] = None if t is None else float(t)
    try:
        return Sentence(obj["index"], obj["text"], speaker,
                        times["start_time"], times["end_time"])
    except ValidationError as exc:
        raise ValidationError(f"line {line}: {exc}") from exc


def _open_lines(source) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8").splitlines()
    if isinstance(source, io.TextIOBase) or hasattr(source, "read"):
        return source.read().splitlines()
    return source


def parse_transcripts(source: str | Path | IO[str] | Iterable[str]) -> list[Conversation]:
    """Parse a newline-delimited transcript file into conversations.

    ``source`` may be a path, an open text stream, or an iterable of
    lines. Blank lines are skipped. Raises ParseError (with the line
    number) for malformed records and ValidationError for invariant
    violations such as empty sentence text.
    """
    conversations = []
    for lineno, raw in enumerate(_open_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", lineno) from exc
        if not isinstance(obj, dict):
            raise ParseError("record is not an object", lineno)
        if "id" not in obj or not isinstance(obj["id"], str):
            raise ParseError("missing or non-string 'id'", lineno)
        if "sentences" not in obj or not isinstance(obj["sentences"], list):
            raise ParseError("missing or non-list 'sentences'", lineno)
        sentences = [
            _sentence_from_record(s, lineno, pos) if isinstance(s, dict)
            else _raise_parse(f"sentence {pos} is not an object", lineno)
            for pos, s in enumerate(obj["sentences"])
        ]
        duration = obj.get("duration")
        if duration is not None and not isinstance(duration, (int, float)):
            raise ParseError("'duration' is not a number", lineno)
        try:
            conversations.append(Conversation(
                obj["id"], tuple(sentences),
                None if duration is None else float(duration)))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from exc
    return conversations


def _raise_parse(msg: str, line: int):
    raise ParseError(msg, line)


def conversation_to_record(conv: Conversation) -> dict:
    """JSON-serializable record for one conversation."""
    record = {
        "id": conv.id,
        "sentences": [
            {
                "index": s.index,
                "text": s.text,
                "speaker": s.speaker,
                "start_time": s.start_time,
                "end_time": s.end_time,
            }
            for s in conv.sentences
        ],
    }
    if conv.duration is not None:
        record["duration"] = conv.duration
    return record


def write_transcripts(conversations: Sequence[Conversation],
                      target: str | Path | IO[str]) -> None:
    """Write conversations as newline-delimited transcript records."""
    lines = [json.dumps(conversation_to_record(c), ensure_ascii=False)
             for c in conversations]
    payload = "\n".join(lines) + ("\n" if lines else "")
    if isinstance(target, (str, Path)):
        Path(target).write_text(payload, encoding="utf-8")
    else:
        target.write(payload)
