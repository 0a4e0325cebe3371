"""Turning per-window predictions into one decision per change point.

With overlapping windows (stride < window length) each interior change
point is predicted several times; aggregation combines those votes.
Independent votes that each err with probability e yield a majority
decision that errs with the binomial tail probability, which for v=3,
e=0.3 drops to 0.216, which is the reason overlap helps at all. The analysis
helpers here compute that expectation so simulations can be checked
against it.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

from .errors import ConfigError, ValidationError
from .predictor import Predictor, WindowPrediction, predict_mpm, predict_spm
from .transcript import ChangeSequence, Conversation
from .windowing import (DEFAULT_H, DEFAULT_K, DEFAULT_STRIDE,
                        DEFAULT_WINDOW_LEN, WindowSet, build_mpm_windows,
                        build_spm_contexts)

AGGREGATION_METHODS = ("majority", "weighted-mean")


@dataclass(frozen=True)
class AggregationPolicy:
    """How multiple votes on one change point become a decision."""

    method: str = "majority"
    threshold: float = 0.5

    def __post_init__(self):
        if self.method not in AGGREGATION_METHODS:
            raise ConfigError(
                f"unknown aggregation method {self.method!r}; "
                f"expected one of {AGGREGATION_METHODS}")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must be in (0, 1), got {self.threshold}")


@dataclass(frozen=True)
class VoteSet:
    """All probabilities predicted for one change point, one per window."""

    change_index: int
    probabilities: tuple[float, ...]
    window_indices: tuple[int, ...]

    def __post_init__(self):
        if len(self.probabilities) == 0:
            raise ValidationError(
                f"change point {self.change_index} has no votes")
        if len(self.probabilities) != len(self.window_indices):
            raise ValidationError("one window index per probability required")
        for p in self.probabilities:
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"probability {p} outside [0, 1]")

    def __len__(self) -> int:
        return len(self.probabilities)

    @property
    def mean_probability(self) -> float:
        return sum(self.probabilities) / len(self.probabilities)


def aggregate_votes(votes: VoteSet, policy: AggregationPolicy) -> tuple[int, float]:
    """Collapse one vote set to (decision, mean probability).

    majority: each probability votes 1 iff it reaches the threshold; the
    majority of votes wins, and an exact tie falls back to the mean
    probability (strictly above threshold -> 1, else 0).

    weighted-mean: the mean probability reaching the threshold -> 1.
    """
    mean = votes.mean_probability
    if policy.method == "weighted-mean":
        return (1 if mean >= policy.threshold else 0), mean
    ones = sum(1 for p in votes.probabilities if p >= policy.threshold)
    zeros = len(votes) - ones
    if ones > zeros:
        return 1, mean
    if ones < zeros:
        return 0, mean
    return (1 if mean > policy.threshold else 0), mean


def collect_votes(window_set: WindowSet,
                  predictions: Sequence[WindowPrediction]) -> list[VoteSet]:
    """Group per-window probabilities by the change point they concern."""
    if len(predictions) != len(window_set.windows):
        raise ValidationError(
            f"{len(predictions)} predictions for {len(window_set.windows)} windows")
    by_index = {p.window_index: p for p in predictions}
    if len(by_index) != len(predictions):
        raise ValidationError("duplicate window indices in predictions")
    votes = []
    for p in range(window_set.n - 1):
        probs = []
        winds = []
        for w in window_set.windows:
            if w.start <= p < w.stop - 1:
                pred = by_index[w.window_index]
                probs.append(pred.probabilities[p - w.start])
                winds.append(w.window_index)
        votes.append(VoteSet(p, tuple(probs), tuple(winds)))
    return votes


@dataclass(frozen=True)
class MpmRunResult:
    """Everything produced by one sliding-window pass over a conversation."""

    conversation_id: str
    window_predictions: tuple[WindowPrediction, ...]
    vote_sets: tuple[VoteSet, ...]
    changes: ChangeSequence

    @property
    def vote_counts(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.vote_sets)


def run_spm(model: Predictor, conv: Conversation, h: int = DEFAULT_H,
            k: int = DEFAULT_K, threshold: float = 0.5) -> ChangeSequence:
    """One prediction per boundary; probability >= threshold means change."""
    contexts = build_spm_contexts(conv, h, k)
    probs = [predict_spm(model, ctx) for ctx in contexts]
    decisions = tuple(1 if p >= threshold else 0 for p in probs)
    return ChangeSequence(decisions, tuple(probs))


def run_mpm(model: Predictor, conv: Conversation,
            window_len: int = DEFAULT_WINDOW_LEN, stride: int = DEFAULT_STRIDE,
            policy: AggregationPolicy = AggregationPolicy()) -> MpmRunResult:
    """Sliding-window predictions aggregated to one decision per boundary.

    Uses the model's batch hook (``predict_windows``) when it has one, so
    remote predictors can run windows concurrently.
    """
    window_set = build_mpm_windows(len(conv), window_len, stride)
    window_sents = [w.sentences(conv) for w in window_set.windows]
    batch = getattr(model, "predict_windows", None)
    if batch is not None:
        raw = batch(window_sents)
        predictions = []
        for w, probs in zip(window_set.windows, raw):
            if len(probs) != len(w) - 1:
                raise ValidationError(
                    f"window {w.window_index}: got {len(probs)} probabilities "
                    f"for {len(w) - 1} boundaries")
            predictions.append(WindowPrediction(w.window_index, tuple(probs)))
    else:
        predictions = [predict_mpm(model, w, conv.sentences)
                       for w in window_set.windows]
    vote_sets = collect_votes(window_set, predictions)
    decisions = []
    means = []
    for votes in vote_sets:
        decision, mean = aggregate_votes(votes, policy)
        decisions.append(decision)
        means.append(mean)
    changes = ChangeSequence(tuple(decisions), tuple(means))
    return MpmRunResult(conv.id, tuple(predictions), tuple(vote_sets), changes)


def expected_majority_error(error_rate: float, votes: int) -> float:
    """Probability that a majority of independent votes is wrong.

    Each vote is independently wrong with probability ``error_rate``; the
    decision errs when more than half the votes err (binomial tail). Only
    odd vote counts have this closed form; even counts can tie, and ties
    are resolved from mean probabilities, which a count-only model cannot
    see.
    """
    if not 0.0 <= error_rate <= 1.0:
        raise ConfigError(f"error_rate must be in [0, 1], got {error_rate}")
    if votes < 1 or votes % 2 == 0:
        raise ConfigError(f"votes must be a positive odd count, got {votes}")
    first_wrong_majority = votes // 2 + 1
    return float(sum(
        comb(votes, j) * error_rate ** j * (1.0 - error_rate) ** (votes - j)
        for j in range(first_wrong_majority, votes + 1)))


@dataclass(frozen=True)
class EfficacyReport:
    """How aggregation treated change points that had a wrong vote.

    Considers only points where at least one window voted against gold:
    ``partial_to_correct`` means aggregation fixed it;
    ``partial_to_incorrect`` means some (not all) votes were wrong and the
    aggregate still missed; ``consistently_incorrect`` means every vote
    was wrong, nothing to rescue.
    """

    partial_to_correct: int
    partial_to_incorrect: int
    consistently_incorrect: int

    @property
    def total(self) -> int:
        return (self.partial_to_correct + self.partial_to_incorrect
                + self.consistently_incorrect)

    @property
    def percentages(self) -> tuple[float, float, float]:
        """Shares of the three categories, summing to 100 (when any)."""
        t = self.total
        if t == 0:
            return (0.0, 0.0, 0.0)
        return (100.0 * self.partial_to_correct / t,
                100.0 * self.partial_to_incorrect / t,
                100.0 * self.consistently_incorrect / t)


def efficacy_analysis(vote_sets: Sequence[VoteSet], changes: ChangeSequence,
                      gold: ChangeSequence,
                      policy: AggregationPolicy = AggregationPolicy()
                      ) -> EfficacyReport:
    """Classify every change point that drew at least one wrong vote.

    ``vote_sets`` and ``changes`` come from one MPM run; ``gold`` is the
    reference change sequence of the same conversation. A window's vote
    is its thresholded probability.
    """
    if len(vote_sets) != len(gold.decisions) \
            or len(changes.decisions) != len(gold.decisions):
        raise ValidationError(
            f"votes/decisions/gold lengths differ: {len(vote_sets)}/"
            f"{len(changes.decisions)}/{len(gold.decisions)}")
    a = b = c = 0
    for votes, final, truth in zip(vote_sets, changes.decisions,
                                   gold.decisions):
        wrong = sum(1 for p in votes.probabilities
                    if (1 if p >= policy.threshold else 0) != truth)
        if wrong == 0:
            continue
        if wrong == len(votes):
            c += 1
        elif final == truth:
            a += 1
        else:
            b += 1
    return EfficacyReport(a, b, c)


def merge_efficacy(reports: Sequence[EfficacyReport]) -> EfficacyReport:
    """Pool per-conversation efficacy counts into one corpus report."""
    return EfficacyReport(
        sum(r.partial_to_correct for r in reports),
        sum(r.partial_to_incorrect for r in reports),
        sum(r.consistently_incorrect for r in reports))


def expected_error_with_correlation(error_rate: float, votes: int,
                                    correlated_fraction: float) -> float:
    """Expected majority error when a fraction of points is wrong in every
    window (systematically hard points), and the rest err independently.

    A correlated point is wrong with probability 1 regardless of vote
    count; an independent point follows the binomial tail.
    """
    if not 0.0 <= correlated_fraction <= 1.0:
        raise ConfigError(
            f"correlated_fraction must be in [0, 1], got {correlated_fraction}")
    independent = expected_majority_error(error_rate, votes)
    return correlated_fraction + (1.0 - correlated_fraction) * independent
