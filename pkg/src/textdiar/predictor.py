"""Pluggable speaker-change predictors and the trainable lexical baseline.

The baseline is a regularized logistic model over hashed lexical features:
convex, deterministic (zero init, fixed data order), and exactly testable
against the closed-form loss values. Heavier models plug in through the
remote predictor protocol (see remote.py); every predictor exposes the
same small surface:

* ``mode``: "spm" (one boundary per call) or "mpm" (all boundaries of a
  window per call), plus ``kind`` naming the implementation;
* ``predict_boundary(ctx)``: probability of a change at one boundary;
* ``predict_window(sentences)``: per-boundary probabilities for a window.

Training minimizes mean binary cross-entropy over prediction points
(optionally softmax cross-entropy over speaker labels for the
multi-speaker head) by full- or mini-batch gradient descent, with an L2
term reported separately from the data loss.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._kernels import csr_matvec, csr_rmatvec
from .errors import ConfigError, ValidationError
from .features import (DEFAULT_BUCKETS, FeatureVector, FeaturizerConfig,
                       featurize, featurize_sentence, stack_features)
from .transcript import Conversation, Sentence, derive_change_sequence
from .windowing import SpmContext, MpmWindow, WindowSet, build_spm_contexts, build_mpm_windows

DEFAULT_L2 = 1e-4

MODEL_MAGIC = b"TDPM"
MODEL_VERSION = 1


@dataclass(frozen=True)
class WindowPrediction:
    """Per-boundary change probabilities for one window."""

    window_index: int
    probabilities: tuple[float, ...]

    def __post_init__(self):
        for p in self.probabilities:
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"probability {p} outside [0, 1]")


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings for the builtin baseline."""

    learning_rate: float = 0.1
    epochs: int = 300
    l2: float = DEFAULT_L2
    n_buckets: int = DEFAULT_BUCKETS
    batch_size: int | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")


@dataclass(frozen=True)
class TrainResult:
    """Trained model plus data loss before/after training.

    ``final_loss`` is the unregularized training objective (the value the
    optimizer reports); ``final_regularized_loss`` adds the L2 term.
    """

    model: "Predictor"
    initial_loss: float
    final_loss: float
    final_regularized_loss: float


class Predictor:
    """Interface shared by builtin and remote predictors."""

    kind: str = "abstract"
    mode: str = "spm"

    def predict_boundary(self, ctx: SpmContext) -> float:
        raise NotImplementedError

    def predict_window(self, sentences: Sequence[Sentence]) -> list[float]:
        raise NotImplementedError


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=np.float64)))


class LinearChangePredictor(Predictor):
    """Logistic model over pair features; serves spm and mpm modes."""

    def __init__(self, weights: np.ndarray, featurizer: FeaturizerConfig,
                 mode: str):
        if mode not in ("spm", "mpm"):
            raise ConfigError(f"unknown predictor mode {mode!r}")
        if featurizer.kind != "pair":
            raise ConfigError("change predictor needs a 'pair' featurizer")
        if weights.shape != (featurizer.dim,):
            raise ConfigError(
                f"weight shape {weights.shape} != featurizer dim {featurizer.dim}")
        self.weights = np.asarray(weights, dtype=np.float64)
        self.featurizer = featurizer
        self.mode = mode

    @property
    def kind(self) -> str:
        return f"builtin-{self.mode}"

    def score(self, vector: FeatureVector) -> float:
        return vector.dot(self.weights)

    def predict_boundary(self, ctx: SpmContext) -> float:
        left, right = ctx.pair
        x = featurize(left, right, ctx.sentences, self.featurizer)
        return float(_sigmoid(self.score(x)))

    def predict_window(self, sentences: Sequence[Sentence]) -> list[float]:
        sents = tuple(sentences)
        if len(sents) < 2:
            raise ValidationError("window must contain at least 2 sentences")
        return [
            float(_sigmoid(self.score(featurize(sents[i], sents[i + 1], sents,
                                                self.featurizer))))
            for i in range(len(sents) - 1)
        ]


class MultispeakerPredictor(Predictor):
    """Per-sentence linear softmax head over ``num_speakers`` labels."""

    kind = "builtin-multispeaker"
    mode = "mpm"

    def __init__(self, weights: np.ndarray, featurizer: FeaturizerConfig):
        if featurizer.kind != "sentence":
            raise ConfigError("multispeaker predictor needs a 'sentence' featurizer")
        if weights.ndim != 2 or weights.shape[0] < 2:
            raise ConfigError("multispeaker weights must be (p >= 2, dim)")
        if weights.shape[1] != featurizer.dim:
            raise ConfigError(
                f"weight dim {weights.shape[1]} != featurizer dim {featurizer.dim}")
        self.weights = np.asarray(weights, dtype=np.float64)
        self.featurizer = featurizer

    @property
    def num_speakers(self) -> int:
        return self.weights.shape[0]

    def predict_labels(self, sentences: Sequence[Sentence]) -> np.ndarray:
        """Label distribution per sentence, shape (len(sentences), p)."""
        vectors = [featurize_sentence(s, tuple(sentences), self.featurizer)
                   for s in sentences]
        scores = np.stack([
            np.array([v.dot(w) for w in self.weights]) for v in vectors])
        return _softmax_rows(scores)


def predict_spm(model: Predictor, ctx: SpmContext) -> float:
    """Change probability at one boundary (requires an spm-mode model)."""
    if model.mode != "spm":
        raise ConfigError(f"predict_spm needs an spm-mode model, got {model.mode!r}")
    p = float(model.predict_boundary(ctx))
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"predictor emitted probability {p} outside [0, 1]")
    return p


def predict_mpm(model: Predictor, window: MpmWindow,
                sentences: Sequence[Sentence]) -> WindowPrediction:
    """Per-boundary probabilities for one window of a conversation.

    ``sentences`` are the whole conversation's sentences; the window's
    span selects its slice.
    """
    if model.mode != "mpm":
        raise ConfigError(f"predict_mpm needs an mpm-mode model, got {model.mode!r}")
    window_sents = tuple(sentences)[window.start:window.stop]
    probs = [float(p) for p in model.predict_window(window_sents)]
    if len(probs) != len(window) - 1:
        raise ValidationError(
            f"window {window.window_index}: got {len(probs)} probabilities "
            f"for {len(window) - 1} boundaries")
    return WindowPrediction(window.window_index, tuple(probs))


# ---------------------------------------------------------------------------
# Losses and gradients
# ---------------------------------------------------------------------------

def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _binary_loss_grad(indptr, indices, values, y, w, l2):
    """Mean BCE over rows plus L2; returns (data_loss, total_loss, grad)."""
    n = y.shape[0]
    z = csr_matvec(indptr, indices, values, w)
    # softplus(z) - y*z == -[y log p + (1-y) log(1-p)], numerically stable
    data_loss = float(np.sum(np.logaddexp(0.0, z) - y * z) / n)
    residual = (_sigmoid(z) - y) / n
    grad = csr_rmatvec(indptr, indices, values, residual, w.shape[0]) + l2 * w
    total = data_loss + 0.5 * l2 * float(np.dot(w, w))
    return data_loss, total, grad


def _softmax_loss_grad(indptr, indices, values, y_idx, W, l2):
    """Mean softmax cross-entropy over rows plus L2."""
    n = y_idx.shape[0]
    p, dim = W.shape
    z = np.stack([csr_matvec(indptr, indices, values, W[c]) for c in range(p)],
                 axis=1)
    shifted = z - z.max(axis=1, keepdims=True)
    logsumexp = np.log(np.sum(np.exp(shifted), axis=1)) + z.max(axis=1)
    data_loss = float(np.sum(logsumexp - z[np.arange(n), y_idx]) / n)
    probs = _softmax_rows(z)
    grad = np.empty_like(W)
    for c in range(p):
        residual = (probs[:, c] - (y_idx == c)) / n
        grad[c] = csr_rmatvec(indptr, indices, values, residual, dim) + l2 * W[c]
    total = data_loss + 0.5 * l2 * float(np.sum(W * W))
    return data_loss, total, grad


def _gradient_descent(loss_grad, w0, config: TrainConfig, n_rows: int):
    """Deterministic (mini-)batch gradient descent from w0.

    ``loss_grad(w, row_slice)`` evaluates the objective on a row slice;
    batches are fixed contiguous slices, so training is reproducible
    without any RNG.
    """
    w = w0.copy()
    full = slice(0, n_rows)
    initial_loss = loss_grad(w, full)[0]
    if config.batch_size is None or config.batch_size >= n_rows:
        for _ in range(config.epochs):
            _, _, grad = loss_grad(w, full)
            w = w - config.learning_rate * grad
    else:
        for _ in range(config.epochs):
            for start in range(0, n_rows, config.batch_size):
                batch = slice(start, min(start + config.batch_size, n_rows))
                _, _, grad = loss_grad(w, batch)
                w = w - config.learning_rate * grad
    final_data, final_total, _ = loss_grad(w, full)
    return w, initial_loss, final_data, final_total


def _pair_rows(data, featurizer: FeaturizerConfig):
    """Flatten (context, label) / (window, labels) data to feature rows."""
    vectors: list[FeatureVector] = []
    labels: list[int] = []
    for item, y in data:
        if isinstance(item, SpmContext):
            left, right = item.pair
            vectors.append(featurize(left, right, item.sentences, featurizer))
            labels.append(_check_binary(y))
        else:
            sents = tuple(item)
            ys = list(y)
            if len(ys) != len(sents) - 1:
                raise ValidationError(
                    f"{len(ys)} labels for a {len(sents)}-sentence window")
            for i, yi in enumerate(ys):
                vectors.append(featurize(sents[i], sents[i + 1], sents, featurizer))
                labels.append(_check_binary(yi))
    return vectors, np.array(labels, dtype=np.float64)


def _check_binary(y) -> int:
    if y not in (0, 1):
        raise ValidationError(f"label {y!r} not in {{0, 1}}")
    return int(y)


def _train_binary(data, config: TrainConfig, mode: str) -> TrainResult:
    if not data:
        raise ValidationError("training data is empty")
    featurizer = FeaturizerConfig(n_buckets=config.n_buckets, kind="pair")
    vectors, y = _pair_rows(data, featurizer)
    if len(vectors) == 0:
        raise ValidationError("training data contains no prediction points")
    indptr, indices, values = stack_features(vectors)

    def loss_grad(w, rows: slice):
        lo, hi = rows.start, rows.stop
        sub_indptr = indptr[lo:hi + 1] - indptr[lo]
        sub = slice(indptr[lo], indptr[hi])
        return _binary_loss_grad(sub_indptr, indices[sub], values[sub],
                                 y[lo:hi], w, config.l2)

    w0 = np.zeros(featurizer.dim)
    w, initial, final, final_total = _gradient_descent(
        loss_grad, w0, config, len(y))
    model = LinearChangePredictor(w, featurizer, mode)
    return TrainResult(model, initial, final, final_total)


def train_baseline_spm(data: Sequence[tuple[SpmContext, int]],
                       config: TrainConfig = TrainConfig()) -> TrainResult:
    """Train the boundary classifier on single-prediction contexts.

    Minimizes mean BCE over the prediction points (one per context), from
    zero weights, so the initial loss is exactly ln 2.
    """
    return _train_binary(list(data), config, "spm")


def train_baseline_mpm(data: Sequence[tuple[Sequence[Sentence], Sequence[int]]],
                       config: TrainConfig = TrainConfig()) -> TrainResult:
    """Train the boundary classifier on windows.

    Each example is (window sentences, per-boundary labels); the loss is
    normalized by the total number of boundary predictions across all
    windows.
    """
    return _train_binary(list(data), config, "mpm")


def train_baseline_multispeaker(
        data: Sequence[tuple[Sequence[Sentence], Sequence[int]]],
        num_speakers: int,
        config: TrainConfig = TrainConfig()) -> TrainResult:
    """Train the per-sentence softmax label head.

    Each example is (window sentences, per-sentence label indices in
    [0, num_speakers)); the loss is softmax cross-entropy normalized by
    the total sentence count, so zero weights give exactly ln(num_speakers).
    """
    if num_speakers < 2:
        raise ConfigError(f"num_speakers must be >= 2, got {num_speakers}")
    data = list(data)
    if not data:
        raise ValidationError("training data is empty")
    featurizer = FeaturizerConfig(n_buckets=config.n_buckets, kind="sentence")
    vectors: list[FeatureVector] = []
    labels: list[int] = []
    for sents, ys in data:
        sents = tuple(sents)
        ys = list(ys)
        if len(ys) != len(sents):
            raise ValidationError(
                f"{len(ys)} labels for a {len(sents)}-sentence window")
        for s, yi in zip(sents, ys):
            yi = int(yi)
            if not 0 <= yi < num_speakers:
                raise ValidationError(
                    f"label index {yi} outside 0..{num_speakers - 1}")
            vectors.append(featurize_sentence(s, sents, featurizer))
            labels.append(yi)
    indptr, indices, values = stack_features(vectors)
    y_idx = np.array(labels, dtype=np.int64)

    def loss_grad(W_flat, rows: slice):
        W = W_flat.reshape(num_speakers, featurizer.dim)
        lo, hi = rows.start, rows.stop
        sub_indptr = indptr[lo:hi + 1] - indptr[lo]
        sub = slice(indptr[lo], indptr[hi])
        data_loss, total, grad = _softmax_loss_grad(
            sub_indptr, indices[sub], values[sub], y_idx[lo:hi], W, config.l2)
        return data_loss, total, grad.ravel()

    w0 = np.zeros(num_speakers * featurizer.dim)
    w, initial, final, final_total = _gradient_descent(
        loss_grad, w0, config, len(labels))
    model = MultispeakerPredictor(w.reshape(num_speakers, featurizer.dim),
                                  featurizer)
    return TrainResult(model, initial, final, final_total)


def objective(model: Predictor, batch, l2: float = DEFAULT_L2):
    """Regularized training objective and its gradient at the model's
    current parameters, on ``batch`` (same shape as the training data for
    the model's kind). Exposed for gradient checking."""
    if isinstance(model, LinearChangePredictor):
        vectors, y = _pair_rows(list(batch), model.featurizer)
        indptr, indices, values = stack_features(vectors)
        _, total, grad = _binary_loss_grad(indptr, indices, values, y,
                                           model.weights, l2)
        return total, grad
    if isinstance(model, MultispeakerPredictor):
        vectors: list[FeatureVector] = []
        labels: list[int] = []
        for sents, ys in batch:
            sents = tuple(sents)
            for s, yi in zip(sents, list(ys)):
                if not 0 <= int(yi) < model.num_speakers:
                    raise ValidationError(
                        f"label index {yi} outside 0..{model.num_speakers - 1}")
                vectors.append(featurize_sentence(s, sents, model.featurizer))
                labels.append(int(yi))
        indptr, indices, values = stack_features(vectors)
        _, total, grad = _softmax_loss_grad(
            indptr, indices, values, np.array(labels, dtype=np.int64),
            model.weights, l2)
        return total, grad.ravel()
    raise ConfigError(f"objective not defined for {model.kind!r}")


def gradient(model: Predictor, batch, l2: float = DEFAULT_L2) -> np.ndarray:
    """Analytic gradient of the regularized objective (see ``objective``)."""
    return objective(model, batch, l2)[1]


# ---------------------------------------------------------------------------
# Training-data preparation from gold-labeled conversations
# ---------------------------------------------------------------------------

def _require_gold(conv: Conversation):
    gold = conv.speakers
    if gold is None:
        raise ValidationError(
            f"conversation {conv.id!r} is missing speaker labels")
    return gold


def spm_training_data(conversations: Sequence[Conversation], h: int,
                      k: int) -> list[tuple[SpmContext, int]]:
    """(context, change-label) pairs from gold-labeled conversations."""
    data = []
    for conv in conversations:
        gold = derive_change_sequence(_require_gold(conv))
        for ctx in build_spm_contexts(conv, h, k):
            data.append((ctx, gold.decisions[ctx.change_index]))
    return data


def mpm_training_data(conversations: Sequence[Conversation], window_len: int,
                      stride: int) -> list[tuple[tuple[Sentence, ...], tuple[int, ...]]]:
    """(window sentences, per-boundary labels) from gold conversations."""
    data = []
    for conv in conversations:
        gold = derive_change_sequence(_require_gold(conv))
        ws = build_mpm_windows(len(conv), window_len, stride)
        for w in ws.windows:
            labels = tuple(gold.decisions[p] for p in w.change_points)
            data.append((w.sentences(conv), labels))
    return data


def multispeaker_training_data(
        conversations: Sequence[Conversation], window_len: int, stride: int,
        labels: Sequence[str]) -> list[tuple[tuple[Sentence, ...], tuple[int, ...]]]:
    """(window sentences, per-sentence label indices) from gold conversations."""
    index = {lab: i for i, lab in enumerate(labels)}
    data = []
    for conv in conversations:
        gold = _require_gold(conv)
        for lab in gold.labels:
            if lab not in index:
                raise ValidationError(
                    f"conversation {conv.id!r}: speaker {lab!r} not in "
                    f"label set {list(labels)}")
        ws = build_mpm_windows(len(conv), window_len, stride)
        for w in ws.windows:
            idxs = tuple(index[gold.labels[i]] for i in range(w.start, w.stop))
            data.append((w.sentences(conv), idxs))
    return data


# ---------------------------------------------------------------------------
# Model files: magic + version + JSON header + raw little-endian weights
# ---------------------------------------------------------------------------

def save_model(model: Predictor, path: str | Path) -> None:
    """Serialize a builtin model; byte-identical for identical models."""
    if isinstance(model, LinearChangePredictor):
        header = {
            "kind": model.kind,
            "mode": model.mode,
            "featurizer": model.featurizer.to_dict(),
            "shape": [int(model.weights.shape[0])],
        }
        weights = model.weights
    elif isinstance(model, MultispeakerPredictor):
        header = {
            "kind": model.kind,
            "mode": model.mode,
            "featurizer": model.featurizer.to_dict(),
            "shape": [int(model.weights.shape[0]), int(model.weights.shape[1])],
        }
        weights = model.weights
    else:
        raise ConfigError(f"cannot serialize predictor kind {model.kind!r}")
    header_bytes = json.dumps(header, sort_keys=True,
                              separators=(",", ":")).encode("utf-8")
    payload = weights.astype("<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)


def load_model(path: str | Path) -> Predictor:
    """Load a model written by save_model."""
    blob = Path(path).read_bytes()
    if blob[:4] != MODEL_MAGIC:
        raise ValidationError(f"{path}: not a predictor model file")
    if len(blob) < 16:
        raise ValidationError(f"{path}: truncated model file")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != MODEL_VERSION:
        raise ValidationError(f"{path}: unsupported model version {version}")
    (header_len,) = struct.unpack("<Q", blob[8:16])
    if len(blob) < 16 + header_len:
        raise ValidationError(f"{path}: truncated model file")
    try:
        header = json.loads(blob[16:16 + header_len].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ValidationError(f"{path}: unreadable model header") from exc
    payload = blob[16 + header_len:]
    if len(payload) % 8 != 0:
        raise ValidationError(f"{path}: truncated model file")
    weights = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    featurizer = FeaturizerConfig.from_dict(header["featurizer"])
    shape = tuple(header["shape"])
    if int(np.prod(shape)) != weights.shape[0]:
        raise ValidationError(f"{path}: weight payload does not match header shape")
    if header["kind"] == "builtin-multispeaker":
        return MultispeakerPredictor(weights.reshape(shape), featurizer)
    if header["kind"] in ("builtin-spm", "builtin-mpm"):
        return LinearChangePredictor(weights.reshape(shape), featurizer,
                                     header["mode"])
    raise ValidationError(f"{path}: unknown model kind {header['kind']!r}")
