"""Shared fixtures and independent oracles for the test suite.

The oracles here are deliberately naive (exhaustive enumeration) so they
cannot share a bug with the optimized implementations they check.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
import pytest

from textdiar import Conversation, Sentence, SpeakerAssignment

# Move codes used by the alignment oracle; priorities mirror the DP
# tie-break (diagonal over consuming ref over consuming hyp).
DIAG, UP, LEFT = "diag", "up", "left"
_MOVE_PRIORITY = {DIAG: 2, UP: 1, LEFT: 0}


def conv_from_labels(labels, conv_id="conv-0", text_fn=None):
    """Conversation with one short sentence per speaker label."""
    if text_fn is None:
        text_fn = lambda i, lab: f"utterance {i} from {lab}"
    sentences = tuple(
        Sentence(i, text_fn(i, lab), speaker=lab)
        for i, lab in enumerate(labels))
    return Conversation(conv_id, sentences)


def assignment(labels):
    return SpeakerAssignment(tuple(labels))


@lru_cache(maxsize=None)
def _monotone_paths(m: int, n: int) -> tuple[tuple[str, ...], ...]:
    """Every move sequence from (0, 0) to (m, n) on the alignment grid."""
    if m == 0 and n == 0:
        return ((),)
    paths = []
    if m > 0 and n > 0:
        paths.extend(p + (DIAG,) for p in _monotone_paths(m - 1, n - 1))
    if m > 0:
        paths.extend(p + (UP,) for p in _monotone_paths(m - 1, n))
    if n > 0:
        paths.extend(p + (LEFT,) for p in _monotone_paths(m, n - 1))
    return tuple(paths)


def _path_score(path, ref_tokens, hyp_tokens, match, sub, gap):
    i = j = 0
    total = 0.0
    for move in path:
        if move == DIAG:
            total += match if ref_tokens[i] == hyp_tokens[j] else sub
            i += 1
            j += 1
        elif move == UP:
            total += gap
            i += 1
        else:
            total += gap
            j += 1
    return total


def oracle_align(ref_tokens, hyp_tokens, match=2.0, sub=-1.0, gap=-1.0):
    """Exhaustive global alignment: (best score, move sequence).

    Among maximum-score paths, returns the one whose move sequence read
    backwards is lexicographically greatest under diag > up > left. That
    is exactly the path a pointer-following traceback reconstructs when
    the fill breaks ties in that order.
    """
    best_score = None
    best_key = None
    best_path = None
    for path in _monotone_paths(len(ref_tokens), len(hyp_tokens)):
        score = _path_score(path, ref_tokens, hyp_tokens, match, sub, gap)
        key = tuple(_MOVE_PRIORITY[mv] for mv in reversed(path))
        if best_score is None or score > best_score \
                or (score == best_score and key > best_key):
            best_score = score
            best_key = key
            best_path = path
    return best_score, best_path


def oracle_columns(path, ref_tokens, hyp_tokens):
    """Expected (kind, ref_index, hyp_index) triples for an oracle path."""
    cols = []
    i = j = 0
    for move in path:
        if move == DIAG:
            kind = "match" if ref_tokens[i] == hyp_tokens[j] else "substitution"
            cols.append((kind, i, j))
            i += 1
            j += 1
        elif move == UP:
            cols.append(("hyp_gap", i, None))
            i += 1
        else:
            cols.append(("ref_gap", None, j))
            j += 1
    return cols


def oracle_mapping(ref_labels, hyp_labels):
    """Exhaustive optimal speaker mapping over the label union.

    Tries index permutations in lexicographic order and keeps strict
    improvements, matching the documented tie-break.
    """
    labels = sorted(set(ref_labels) | set(hyp_labels))
    best_perm = None
    best_agree = -1
    for perm in itertools.permutations(range(len(labels))):
        mapping = {labels[h]: labels[perm[h]] for h in range(len(labels))}
        agree = sum(1 for r, h in zip(ref_labels, hyp_labels)
                    if mapping[h] == r)
        if agree > best_agree:
            best_agree = agree
            best_perm = perm
    return {labels[h]: labels[best_perm[h]] for h in range(len(labels))}


def round_robin_labels(n, labels, offset=0):
    """Speaker sequence cycling through all labels.

    Guarantees every window overlap of length >= len(labels) sees every
    speaker, which pins cross-window label matching uniquely.
    """
    return tuple(labels[(i + offset) % len(labels)] for i in range(n))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance tests record one line per criterion; the summary hook prints
# them even when capture hides per-test stdout.
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
