"""Hashed sparse features for sentence pairs and single sentences."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textdiar import (
    ConfigError,
    FeatureVector,
    FeaturizerConfig,
    Sentence,
    featurize,
    featurize_sentence,
    jaccard_overlap,
    stack_features,
    tokens,
)


def vec_equal(a: FeatureVector, b: FeatureVector) -> bool:
    return (a.dim == b.dim
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.values, b.values))


class TestTokens:
    def test_lowercase_and_apostrophes(self):
        assert tokens("Don't STOP now.") == ["don't", "stop", "now"]

    def test_punctuation_dropped(self):
        assert tokens("well -- yes!") == ["well", "yes"]

    def test_empty(self):
        assert tokens("...") == []


class TestFeaturizerConfig:
    def test_dim_counts_dense_slots(self):
        pair = FeaturizerConfig(n_buckets=64, kind="pair")
        sent = FeaturizerConfig(n_buckets=64, kind="sentence")
        assert pair.dim == 64 + len(pair.dense_slots)
        assert sent.dim == 64 + len(sent.dense_slots)
        assert pair.dim != sent.dim

    def test_kind_validated(self):
        with pytest.raises(ConfigError):
            FeaturizerConfig(kind="bogus")

    def test_bucket_count_validated(self):
        with pytest.raises(ConfigError):
            FeaturizerConfig(n_buckets=0)

    def test_dict_round_trip(self):
        config = FeaturizerConfig(n_buckets=128, kind="sentence")
        assert FeaturizerConfig.from_dict(config.to_dict()) == config


class TestFeatureVector:
    def test_dot_matches_dense(self):
        vec = FeatureVector(np.array([1, 4]), np.array([2.0, -1.0]), 6)
        w = np.arange(6, dtype=np.float64)
        assert vec.dot(w) == pytest.approx(float(vec.to_dense() @ w))
        assert vec.dot(w) == pytest.approx(2.0 * 1 - 1.0 * 4)

    def test_to_dense_shape(self):
        vec = FeatureVector(np.array([0]), np.array([3.0]), 4)
        np.testing.assert_array_equal(vec.to_dense(), [3.0, 0.0, 0.0, 0.0])


class TestJaccard:
    def test_identical_sentences(self):
        s = Sentence(0, "the cat sat")
        assert jaccard_overlap(s, s) == 1.0

    def test_disjoint(self):
        assert jaccard_overlap(Sentence(0, "aa bb"), Sentence(1, "cc dd")) == 0.0

    def test_partial(self):
        left = Sentence(0, "a b")
        right = Sentence(1, "b c")
        assert jaccard_overlap(left, right) == pytest.approx(1.0 / 3.0)

    def test_empty_token_sets(self):
        # both token-free: identical, by convention
        assert jaccard_overlap(Sentence(0, "..."), Sentence(1, "!!")) == 1.0
        assert jaccard_overlap(Sentence(0, "..."), Sentence(1, "word")) == 0.0


class TestFeaturize:
    def test_deterministic(self):
        left = Sentence(3, "so how did it go?")
        right = Sentence(4, "pretty well I think.")
        config = FeaturizerConfig(n_buckets=256, kind="pair")
        assert vec_equal(featurize(left, right, config=config),
                         featurize(left, right, config=config))

    def test_direction_sensitive(self):
        left = Sentence(0, "totally different words here")
        right = Sentence(1, "another bag of tokens")
        config = FeaturizerConfig(n_buckets=4096, kind="pair")
        assert not vec_equal(featurize(left, right, config=config),
                             featurize(right, left, config=config))

    def test_kind_mismatch_rejected(self):
        sent_config = FeaturizerConfig(kind="sentence")
        with pytest.raises(ConfigError):
            featurize(Sentence(0, "a"), Sentence(1, "b"), config=sent_config)
        pair_config = FeaturizerConfig(kind="pair")
        with pytest.raises(ConfigError):
            featurize_sentence(Sentence(0, "a"), (), pair_config)

    def test_dense_tail_within_dim(self):
        config = FeaturizerConfig(n_buckets=32, kind="pair")
        vec = featurize(Sentence(0, "hello there"), Sentence(1, "general"),
                        config=config)
        assert vec.dim == config.dim
        assert all(0 <= i < config.dim for i in vec.indices)
        # bias slot is always 1, so the last dense index is always present
        assert vec.indices[-1] == config.dim - 1
        assert vec.values[-1] == 1.0

    def test_question_mark_slot(self):
        config = FeaturizerConfig(n_buckets=16, kind="pair")
        slot = config.n_buckets + config.dense_slots.index("left_question")
        asked = featurize(Sentence(0, "really?"), Sentence(1, "yes"),
                          config=config)
        flat = featurize(Sentence(0, "really"), Sentence(1, "yes"),
                         config=config)
        assert asked.to_dense()[slot] == 1.0
        assert flat.to_dense()[slot] == 0.0

    @given(st.text(alphabet="ab cd", min_size=1, max_size=20)
           .filter(lambda t: t.strip()))
    @settings(max_examples=100, deadline=None)
    def test_sparse_dense_agreement(self, text):
        config = FeaturizerConfig(n_buckets=64, kind="sentence")
        vec = featurize_sentence(Sentence(0, text), (), config)
        w = np.random.default_rng(0).normal(size=config.dim)
        assert vec.dot(w) == pytest.approx(float(vec.to_dense() @ w))


class TestStackFeatures:
    def test_csr_reconstruction(self):
        config = FeaturizerConfig(n_buckets=64, kind="pair")
        pairs = [
            (Sentence(0, "one two three"), Sentence(1, "four five")),
            (Sentence(1, "four five"), Sentence(2, "four five")),
            (Sentence(2, "six"), Sentence(3, "seven eight nine")),
        ]
        vectors = [featurize(a, b, config=config) for a, b in pairs]
        indptr, indices, values = stack_features(vectors)
        assert indptr.dtype == np.int64
        assert indptr[0] == 0
        assert indptr[-1] == len(indices) == len(values)
        dense = np.zeros((len(vectors), config.dim))
        for row in range(len(vectors)):
            for k in range(indptr[row], indptr[row + 1]):
                dense[row, indices[k]] = values[k]
        expected = np.stack([v.to_dense() for v in vectors])
        np.testing.assert_array_equal(dense, expected)

    def test_empty_input(self):
        indptr, indices, values = stack_features([])
        assert list(indptr) == [0]
        assert len(indices) == 0
        assert len(values) == 0
