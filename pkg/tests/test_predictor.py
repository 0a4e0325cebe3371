"""Baseline predictors: loss/gradient correctness and model files."""

import math

import numpy as np
import pytest

from textdiar import (
    ConfigError,
    FeaturizerConfig,
    LinearChangePredictor,
    MultispeakerPredictor,
    Sentence,
    SpmContext,
    TrainConfig,
    ValidationError,
    WindowPrediction,
    build_spm_contexts,
    gradient,
    load_model,
    mpm_training_data,
    multispeaker_training_data,
    objective,
    predict_mpm,
    predict_spm,
    save_model,
    spm_training_data,
    train_baseline_mpm,
    train_baseline_multispeaker,
    train_baseline_spm,
)
from textdiar.windowing import build_mpm_windows

from conftest import conv_from_labels

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")

SMALL = FeaturizerConfig(n_buckets=32, kind="pair")
SMALL_SENT = FeaturizerConfig(n_buckets=32, kind="sentence")


def _spm_batch(n=8, seed=0):
    rng = np.random.default_rng(seed)
    words = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot"]
    labels = ["A" if rng.random() < 0.5 else "B" for _ in range(n + 1)]
    conv = conv_from_labels(
        labels, text_fn=lambda i, lab:
        " ".join(rng.choice(words, size=3)) + ("?" if rng.random() < 0.3 else "."))
    contexts = build_spm_contexts(conv, h=2, k=1)
    gold = [1 if labels[c.change_index] != labels[c.change_index + 1] else 0
            for c in contexts]
    return list(zip(contexts, gold))


def _window_batch(seed=0):
    rng = np.random.default_rng(seed)
    words = ["red", "green", "blue", "cyan", "plum"]
    sents = [Sentence(i, " ".join(rng.choice(words, size=4)))
             for i in range(6)]
    return [
        (tuple(sents[0:4]), [1, 0, 1]),
        (tuple(sents[2:6]), [0, 1, 0]),
    ]


def _label_batch(seed=0):
    rng = np.random.default_rng(seed)
    words = ["one", "two", "three", "four"]
    sents = [Sentence(i, " ".join(rng.choice(words, size=3)))
             for i in range(5)]
    return [
        (tuple(sents[0:3]), [0, 1, 2]),
        (tuple(sents[2:5]), [2, 0, 1]),
    ]


def fd_gradient(value_at, w, step=1e-5):
    """Central finite differences of a scalar function of w."""
    out = np.zeros_like(w)
    for i in range(len(w)):
        up = w.copy()
        up[i] += step
        down = w.copy()
        down[i] -= step
        out[i] = (value_at(up) - value_at(down)) / (2 * step)
    return out


class TestInitialLoss:
    def test_spm_zero_init_is_ln2(self):
        data = spm_training_data([conv_from_labels(["A", "B", "A", "A", "B"])],
                                 h=2, k=1)
        result = train_baseline_spm(data, TrainConfig(epochs=0, n_buckets=64))
        assert abs(result.initial_loss - math.log(2)) < 1e-9

    def test_mpm_zero_init_is_ln2(self):
        convs = [conv_from_labels(["A", "B", "B", "A", "A", "B", "A"])]
        data = mpm_training_data(convs, window_len=4, stride=1)
        result = train_baseline_mpm(data, TrainConfig(epochs=0, n_buckets=64))
        assert abs(result.initial_loss - math.log(2)) < 1e-9

    def test_multispeaker_zero_init_is_ln_p(self):
        convs = [conv_from_labels(["A", "B", "C", "A", "C", "B"])]
        data = multispeaker_training_data(convs, window_len=4, stride=1,
                                          labels=["A", "B", "C"])
        for p, expect in ((3, math.log(3)), (5, math.log(5))):
            result = train_baseline_multispeaker(
                data, p, TrainConfig(epochs=0, n_buckets=64))
            assert abs(result.initial_loss - expect) < 1e-9


class TestGradient:
    def test_binary_gradient_matches_fd(self):
        batch = _spm_batch()
        rng = np.random.default_rng(7)
        for _ in range(5):
            w = rng.normal(scale=0.5, size=SMALL.dim)
            model = LinearChangePredictor(w, SMALL, "spm")
            analytic = gradient(model, batch, l2=1e-3)
            fd = fd_gradient(
                lambda v: objective(
                    LinearChangePredictor(v, SMALL, "spm"), batch, l2=1e-3)[0],
                w)
            scale = max(1.0, float(np.max(np.abs(fd))))
            assert float(np.max(np.abs(analytic - fd))) / scale < 1e-6

    def test_softmax_gradient_matches_fd(self):
        batch = _label_batch()
        rng = np.random.default_rng(11)
        p = 3
        for _ in range(3):
            W = rng.normal(scale=0.5, size=(p, SMALL_SENT.dim))
            model = MultispeakerPredictor(W, SMALL_SENT)
            analytic = gradient(model, batch, l2=1e-3)
            fd = fd_gradient(
                lambda v: objective(
                    MultispeakerPredictor(v.reshape(p, SMALL_SENT.dim),
                                          SMALL_SENT), batch, l2=1e-3)[0],
                W.ravel())
            scale = max(1.0, float(np.max(np.abs(fd))))
            assert float(np.max(np.abs(analytic - fd))) / scale < 1e-6

    def test_objective_rejects_unknown_kind(self):
        class Odd:
            kind = "odd"
        with pytest.raises(ConfigError):
            objective(Odd(), [])


class TestZeroWeightPredictions:
    def test_boundary_probability_is_half(self):
        model = LinearChangePredictor(np.zeros(SMALL.dim), SMALL, "spm")
        conv = conv_from_labels(["A", "B", "A"])
        ctx = build_spm_contexts(conv, h=1, k=0)[0]
        assert predict_spm(model, ctx) == 0.5

    def test_window_probabilities_are_half(self):
        model = LinearChangePredictor(np.zeros(SMALL.dim), SMALL, "mpm")
        conv = conv_from_labels(["A", "B", "A", "B"])
        window = build_mpm_windows(4, window_len=4).windows[0]
        pred = predict_mpm(model, window, conv.sentences)
        assert pred.probabilities == (0.5, 0.5, 0.5)

    def test_label_rows_uniform(self):
        model = MultispeakerPredictor(np.zeros((4, SMALL_SENT.dim)),
                                      SMALL_SENT)
        rows = model.predict_labels((Sentence(0, "hi there"),))
        np.testing.assert_allclose(rows, 0.25)


class TestTraining:
    def test_separable_data_converges(self):
        # change pairs share no vocabulary; no-change pairs repeat verbatim
        reps = []
        for i in range(10):
            left = Sentence(0, f"alpha bravo tok{i}")
            right_same = Sentence(1, f"alpha bravo tok{i}")
            right_diff = Sentence(1, f"zulu yankee opp{i}")
            reps.append(((left, right_same), [0]))
            reps.append(((left, right_diff), [1]))
        config = TrainConfig(learning_rate=0.2, epochs=2500, l2=0.0,
                             n_buckets=64)
        result = train_baseline_mpm(
            [(pair, labels) for pair, labels in reps], config)
        assert result.final_loss < 0.01
        assert result.final_loss < result.initial_loss

    def test_training_is_deterministic(self):
        data = _spm_batch(20)
        config = TrainConfig(learning_rate=0.3, epochs=50, n_buckets=64)
        a = train_baseline_spm(data, config)
        b = train_baseline_spm(data, config)
        np.testing.assert_array_equal(a.model.weights, b.model.weights)
        assert a.final_loss == b.final_loss

    def test_minibatch_path_is_deterministic(self):
        data = _spm_batch(20)
        config = TrainConfig(learning_rate=0.3, epochs=20, n_buckets=64,
                             batch_size=4)
        a = train_baseline_spm(data, config)
        b = train_baseline_spm(data, config)
        np.testing.assert_array_equal(a.model.weights, b.model.weights)

    def test_regularizer_reported_separately(self):
        data = _spm_batch(10)
        result = train_baseline_spm(
            data, TrainConfig(epochs=20, l2=0.1, n_buckets=64))
        assert result.final_regularized_loss > result.final_loss

    def test_empty_data_rejected(self):
        with pytest.raises(ValidationError):
            train_baseline_spm([])
        with pytest.raises(ValidationError):
            train_baseline_mpm([])
        with pytest.raises(ValidationError):
            train_baseline_multispeaker([], 2)

    def test_window_label_length_checked(self):
        sents = tuple(Sentence(i, "word here") for i in range(3))
        with pytest.raises(ValidationError):
            train_baseline_mpm([(sents, [1])],
                               TrainConfig(epochs=0, n_buckets=16))

    def test_multispeaker_label_range_checked(self):
        sents = tuple(Sentence(i, "word here") for i in range(2))
        with pytest.raises(ValidationError):
            train_baseline_multispeaker([(sents, [0, 2])], 2,
                                        TrainConfig(epochs=0, n_buckets=16))
        with pytest.raises(ConfigError):
            train_baseline_multispeaker([(sents, [0, 0])], 1)

    def test_train_config_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(epochs=-1)
        with pytest.raises(ConfigError):
            TrainConfig(l2=-0.1)


class TestTrainingData:
    def test_spm_labels_from_gold(self):
        conv = conv_from_labels(["A", "B", "B"])
        data = spm_training_data([conv], h=1, k=0)
        assert [label for _, label in data] == [1, 0]

    def test_mpm_labels_from_gold(self):
        conv = conv_from_labels(["A", "B", "B", "A"])
        data = mpm_training_data([conv], window_len=3, stride=1)
        assert [list(labels) for _, labels in data] == [[1, 0], [0, 1]]

    def test_multispeaker_indices_from_gold(self):
        conv = conv_from_labels(["B", "A", "B"])
        data = multispeaker_training_data([conv], window_len=3, stride=1,
                                          labels=["A", "B"])
        (_, indices), = data
        assert list(indices) == [1, 0, 1]

    def test_missing_gold_rejected(self):
        conv = conv_from_labels(["A", "B"]).with_speakers(
            conv_from_labels(["A", "B"]).speakers)
        bare = conv_from_labels(["A", "B"])
        bare = bare.with_speakers(bare.speakers)  # still labeled; now strip
        from textdiar import Conversation
        unlabeled = Conversation("u", tuple(
            Sentence(s.index, s.text) for s in conv.sentences))
        with pytest.raises(ValidationError):
            spm_training_data([unlabeled], h=1, k=0)


class TestModelFiles:
    def _trained(self, tmp_path):
        data = _spm_batch(10)
        result = train_baseline_spm(
            data, TrainConfig(epochs=10, n_buckets=64))
        path = tmp_path / "model.tdpm"
        save_model(result.model, path)
        return result.model, path

    def test_round_trip_preserves_predictions(self, tmp_path):
        model, path = self._trained(tmp_path)
        loaded = load_model(path)
        conv = conv_from_labels(["A", "B", "A", "B", "A"])
        for ctx in build_spm_contexts(conv, h=2, k=1):
            assert predict_spm(loaded, ctx) == predict_spm(model, ctx)
        assert loaded.mode == model.mode
        np.testing.assert_array_equal(loaded.weights, model.weights)

    def test_file_layout(self, tmp_path):
        _, path = self._trained(tmp_path)
        blob = path.read_bytes()
        assert blob[:4] == b"TDPM"
        assert int.from_bytes(blob[4:8], "little") == 1
        header_len = int.from_bytes(blob[8:16], "little")
        header = blob[16:16 + header_len].decode("utf-8")
        import json
        meta = json.loads(header)
        assert list(meta) == sorted(meta)
        assert meta["mode"] == "spm"
        weights = np.frombuffer(blob[16 + header_len:], dtype="<f8")
        assert weights.shape == tuple(meta["shape"]) or \
            weights.reshape(meta["shape"]).size == weights.size

    def test_save_is_byte_stable(self, tmp_path):
        model, path = self._trained(tmp_path)
        other = tmp_path / "again.tdpm"
        save_model(model, other)
        assert path.read_bytes() == other.read_bytes()

    def test_multispeaker_round_trip(self, tmp_path):
        data = _label_batch()
        result = train_baseline_multispeaker(
            data, 3, TrainConfig(epochs=5, n_buckets=64))
        path = tmp_path / "labels.tdpm"
        save_model(result.model, path)
        loaded = load_model(path)
        sents = (Sentence(0, "one two"), Sentence(1, "three four"))
        np.testing.assert_array_equal(loaded.predict_labels(sents),
                                      result.model.predict_labels(sents))

    def test_corrupt_magic_rejected(self, tmp_path):
        _, path = self._trained(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        bad = tmp_path / "bad.tdpm"
        bad.write_bytes(bytes(blob))
        with pytest.raises(ValidationError):
            load_model(bad)

    def test_truncated_file_rejected(self, tmp_path):
        _, path = self._trained(tmp_path)
        bad = tmp_path / "short.tdpm"
        bad.write_bytes(path.read_bytes()[:10])
        with pytest.raises(ValidationError):
            load_model(bad)


class TestWindowPrediction:
    def test_probability_range_checked(self):
        WindowPrediction(0, (0.2, 0.8))
        with pytest.raises(ValidationError):
            WindowPrediction(0, (1.5,))

    def test_mode_mismatch_checked(self):
        model = LinearChangePredictor(np.zeros(SMALL.dim), SMALL, "mpm")
        conv = conv_from_labels(["A", "B", "A"])
        ctx = build_spm_contexts(conv, h=1, k=0)[0]
        with pytest.raises(ConfigError):
            predict_spm(model, ctx)
