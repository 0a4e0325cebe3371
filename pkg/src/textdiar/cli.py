"""Command-line entry point.

Subcommands cover the full pipeline: ``simulate`` (synthetic corpora),
``align`` (label transfer between transcripts), ``train`` (builtin
baseline models), ``predict`` (change decisions / speaker labels),
``evaluate`` (WDER reports, optionally sweeping window lengths), and
``analyze`` (vote efficacy + error slices).

Settings resolve in three layers: built-in defaults, then a YAML/JSON
config file (``--config``), then explicit flags; flags always win.
All record outputs are newline-delimited JSON ordered by conversation id,
so runs diff cleanly. Exit codes: 0 success, 2 configuration, 3 I/O,
4 wire protocol, 5 data validation.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import click
import yaml

from .aggregation import (AGGREGATION_METHODS, AggregationPolicy,
                          EfficacyReport, MpmRunResult, efficacy_analysis,
                          merge_efficacy, run_mpm, run_spm)
from .alignment import AlignmentScores, align_and_label
from .errors import (ConfigError, ProtocolError, TextDiarError,
                     TransportError, ValidationError)
from .metrics import (BUCKET_MODES, WderReport, build_report, evaluate_pairs,
                      export_errors, format_report_table, score_pair,
                      write_bucket_series, write_report)
from .multispeaker import SpeakerLabelSet, run_multispeaker
from .predictor import (Predictor, TrainConfig, load_model,
                        mpm_training_data, multispeaker_training_data,
                        save_model, spm_training_data, train_baseline_mpm,
                        train_baseline_multispeaker, train_baseline_spm)
from .remote import RemotePredictor
from .synth import NoisyOracle, PermutedLabelOracle, SynthConfig, generate_corpus
from .transcript import (CANONICAL_LABELS, ChangeSequence, Conversation,
                         SpeakerAssignment, decode_speakers,
                         derive_change_sequence, parse_transcripts,
                         write_transcripts)
from .windowing import DEFAULT_H, DEFAULT_K, DEFAULT_STRIDE, DEFAULT_WINDOW_LEN

MODES = ("spm", "mpm", "multispeaker")

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_PROTOCOL = 4
EXIT_VALIDATION = 5

_CONFIG_KEYS = {
    "mode", "window_len", "stride", "h", "k", "method", "threshold",
    "model", "endpoint", "seed", "jobs", "bucket_mode", "edges",
    "oracle_error", "oracle_confidence", "oracle_correlated",
    "num_speakers", "learning_rate", "epochs", "l2", "buckets",
    "batch_size", "band", "radius", "sample",
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {', '.join(unknown)}")
    return data


def _setting(flag_value, config: dict, key: str, default):
    """Flag > config file > default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return default


def _read_transcripts(path: str) -> list[Conversation]:
    convs = parse_transcripts(path)
    seen: dict[str, int] = {}
    for c in convs:
        if c.id in seen:
            raise ValidationError(f"{path}: duplicate conversation id {c.id!r}")
        seen[c.id] = 1
    return convs


def _parallel(items: Sequence, fn: Callable, jobs: int) -> list:
    """Apply fn to every item, optionally with a thread pool.

    Results come back in input order; callers re-sort by id before
    writing, so completion order never leaks into outputs.
    """
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _parse_edges(text: str | Sequence[float] | None):
    if text is None:
        return None
    if isinstance(text, str):
        try:
            return tuple(float(part) for part in text.split(",") if part.strip())
        except ValueError as exc:
            raise ConfigError(f"bad edge list {text!r}: {exc}") from exc
    return tuple(float(e) for e in text)


def _make_policy(method, threshold, config) -> AggregationPolicy:
    return AggregationPolicy(
        method=_setting(method, config, "method", "majority"),
        threshold=float(_setting(threshold, config, "threshold", 0.5)))


class _PredictorSpec:
    """Resolved predictor choice: builtin model file, remote endpoint, or
    a gold-corrupting oracle built per conversation."""

    def __init__(self, mode: str, model_path: str | None, endpoint: str | None,
                 oracle_error: float | None, oracle_confidence: float,
                 oracle_correlated: float, seed: int, jobs: int):
        chosen = [x for x in (model_path, endpoint, oracle_error) if x is not None]
        if len(chosen) > 1:
            raise ConfigError(
                "choose one predictor: --model, --endpoint, or --oracle-error")
        if not chosen:
            raise ConfigError(
                "no predictor configured; pass --model, --endpoint, or "
                "--oracle-error")
        self.mode = mode
        self.seed = seed
        self.oracle_error = oracle_error
        self.oracle_confidence = oracle_confidence
        self.oracle_correlated = oracle_correlated
        self._shared: Predictor | None = None
        if model_path is not None:
            model = load_model(model_path)
            if mode == "multispeaker":
                if not hasattr(model, "predict_labels"):
                    raise ConfigError(
                        f"{model_path}: model kind {model.kind!r} cannot "
                        f"produce speaker labels")
            elif model.mode != mode:
                raise ConfigError(
                    f"{model_path}: model was trained for mode "
                    f"{model.mode!r}, not {mode!r}")
            self._shared = model
        elif endpoint is not None:
            if mode == "multispeaker":
                raise ConfigError(
                    "the remote protocol carries change probabilities only; "
                    "multispeaker mode needs --model or --oracle-error")
            self._shared = RemotePredictor(endpoint, mode,
                                           max_concurrency=max(1, jobs))

    def for_conversation(self, conv: Conversation) -> Predictor:
        if self._shared is not None:
            return self._shared
        if self.mode == "multispeaker":
            return PermutedLabelOracle(conv, seed=self.seed,
                                       error_rate=self.oracle_error)
        return NoisyOracle(conv, self.oracle_error, seed=self.seed,
                           mode=self.mode, confidence=self.oracle_confidence,
                           correlated_fraction=self.oracle_correlated)


def _decode_prediction(conv: Conversation, changes: ChangeSequence
                       ) -> tuple[str, ...]:
    """Two-speaker labels for a predicted change sequence.

    Anchored to the gold initial speaker when the conversation carries
    exactly two labels, so analyses can compare labels directly;
    canonical labels otherwise (WDER is mapping-invariant anyway).
    """
    initial, other = CANONICAL_LABELS
    gold = conv.speakers
    if gold is not None:
        distinct = sorted(set(gold.labels))
        if len(distinct) == 2:
            initial = gold.labels[0]
            other = distinct[0] if distinct[1] == initial else distinct[1]
        elif len(distinct) == 1:
            initial = gold.labels[0]
            other = CANONICAL_LABELS[0] if initial != CANONICAL_LABELS[0] \
                else CANONICAL_LABELS[1]
    return tuple(decode_speakers(changes, initial, other).labels)


def _predict_one(spec: _PredictorSpec, conv: Conversation, h: int, k: int,
                 window_len: int, stride: int, policy: AggregationPolicy,
                 want_votes: bool = False):
    """Prediction record for one conversation (plus the run for analyze)."""
    model = spec.for_conversation(conv)
    run: MpmRunResult | None = None
    if spec.mode == "spm":
        changes = run_spm(model, conv, h, k, policy.threshold)
        speakers = _decode_prediction(conv, changes)
        probabilities = changes.probabilities
    elif spec.mode == "mpm":
        run = run_mpm(model, conv, window_len, stride, policy)
        changes = run.changes
        speakers = _decode_prediction(conv, changes)
        probabilities = changes.probabilities
    else:
        result = run_multispeaker(model, conv, window_len, stride)
        speakers = result.assignment.labels
        changes = derive_change_sequence(result.assignment)
        probabilities = tuple(float(d) for d in changes.decisions)
    record = {
        "id": conv.id,
        "decisions": list(changes.decisions),
        "probabilities": [round(p, 12) for p in probabilities],
        "speakers": list(speakers),
    }
    if want_votes:
        return record, run
    return record


def _write_records(records: list[dict], target: str | None) -> None:
    lines = [json.dumps(r, sort_keys=True) for r in records]
    if target is None or target == "-":
        for line in lines:
            click.echo(line)
        return
    with open(target, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def _hyp_from_prediction(gold: Conversation, record: dict) -> Conversation:
    speakers = record.get("speakers")
    if not isinstance(speakers, list) \
            or not all(isinstance(s, str) for s in speakers):
        raise ValidationError(
            f"prediction for {gold.id!r} has no usable speaker list")
    if len(speakers) != len(gold):
        raise ValidationError(
            f"prediction for {gold.id!r} labels {len(speakers)} sentences; "
            f"conversation has {len(gold)}")
    return gold.with_speakers(SpeakerAssignment(tuple(speakers)))


def _read_predictions(path: str, gold_by_id: dict[str, Conversation]
                      ) -> dict[str, Conversation]:
    """Load a predictions file as labeled conversations.

    Accepts either prediction records (joined to gold by id) or full
    transcript records that already carry speakers.
    """
    out: dict[str, Conversation] = {}
    first_error: Exception | None = None
    try:
        for conv in parse_transcripts(path):
            out[conv.id] = conv
        return out
    except TextDiarError as exc:
        first_error = exc
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                raise ValidationError(
                    f"{path}: line {lineno}: neither a transcript nor a "
                    f"prediction record ({first_error})")
            if not isinstance(record, dict) or "id" not in record:
                raise ValidationError(
                    f"{path}: line {lineno}: record has no conversation id")
            conv = gold_by_id.get(record["id"])
            if conv is None:
                raise ValidationError(
                    f"{path}: line {lineno}: conversation {record['id']!r} "
                    f"not present in the gold transcripts")
            out[record["id"]] = _hyp_from_prediction(conv, record)
    return out


@click.group()
def cli():
    """Text-only speaker diarization via sentence change detection."""


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--config", "config_path", type=str, default=None,
              help="YAML/JSON settings file (flags override it).")
@click.option("--count", type=int, default=10, show_default=True,
              help="Conversations to generate.")
@click.option("--min-sentences", type=int, default=30, show_default=True)
@click.option("--max-sentences", type=int, default=60, show_default=True)
@click.option("--speakers", "num_speakers", type=int, default=None,
              help="Speaker count per conversation.  [default: 2]")
@click.option("--change-rate", type=float, default=0.3, show_default=True,
              help="Probability of a speaker change at each boundary.")
@click.option("--vocab-size", type=int, default=12, show_default=True,
              help="Distinct characteristic words per speaker.")
@click.option("--seed", type=int, default=None, help="RNG seed.  [default: 0]")
@click.option("-o", "--out", type=str, required=True,
              help="Output transcript file (JSONL).")
def simulate(config_path, count, min_sentences, max_sentences, num_speakers,
             change_rate, vocab_size, seed, out):
    """Generate a synthetic gold-labeled corpus."""
    config = _load_config(config_path)
    synth = SynthConfig(
        min_sentences=min_sentences,
        max_sentences=max_sentences,
        num_speakers=int(_setting(num_speakers, config, "num_speakers", 2)),
        change_rate=change_rate,
        vocab_size=vocab_size,
        seed=int(_setting(seed, config, "seed", 0)),
    )
    corpus = generate_corpus(synth, count)
    write_transcripts(corpus, out)
    click.echo(f"wrote {len(corpus)} conversations to {out}")


# ---------------------------------------------------------------------------
# align
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--ref", "ref_path", type=str, required=True,
              help="Reference transcripts (with speakers).")
@click.option("--hyp", "hyp_path", type=str, required=True,
              help="Hypothesis transcripts (text only).")
@click.option("-o", "--out", type=str, required=True,
              help="Labeled hypothesis transcript output.")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--band", type=int, default=None,
              help="Alignment band width (full-width when omitted).")
@click.option("--jobs", type=int, default=None,
              help="Worker threads over conversations.  [default: 1]")
def align(ref_path, hyp_path, out, config_path, band, jobs):
    """Transfer speakers from reference to hypothesis transcripts."""
    config = _load_config(config_path)
    band = _setting(band, config, "band", None)
    jobs = int(_setting(jobs, config, "jobs", 1))
    refs = {c.id: c for c in _read_transcripts(ref_path)}
    hyps = _read_transcripts(hyp_path)
    missing = sorted(h.id for h in hyps if h.id not in refs)
    if missing:
        raise ValidationError(
            f"hypothesis conversations missing from reference: "
            f"{', '.join(missing)}")

    def one(hyp: Conversation) -> Conversation:
        return align_and_label(refs[hyp.id], hyp, AlignmentScores(), band)

    labeled = _parallel(hyps, one, jobs)
    labeled.sort(key=lambda c: c.id)
    write_transcripts(labeled, out)
    click.echo(f"wrote {len(labeled)} labeled conversations to {out}")


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--data", "data_path", type=str, required=True,
              help="Gold transcripts to train on.")
@click.option("-o", "--out", type=str, required=True,
              help="Model file to write.")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--mode", type=click.Choice(MODES), default=None,
              help="Training objective.  [default: mpm]")
@click.option("--h", "h", type=int, default=None,
              help=f"Sentences before an spm boundary.  [default: {DEFAULT_H}]")
@click.option("--k", "k", type=int, default=None,
              help=f"Sentences after an spm boundary.  [default: {DEFAULT_K}]")
@click.option("--window-len", type=int, default=None,
              help=f"Window length.  [default: {DEFAULT_WINDOW_LEN}]")
@click.option("--stride", type=int, default=None,
              help=f"Window stride.  [default: {DEFAULT_STRIDE}]")
@click.option("--num-speakers", type=int, default=None,
              help="Label head size for multispeaker mode.")
@click.option("--learning-rate", type=float, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--l2", type=float, default=None)
@click.option("--buckets", type=int, default=None,
              help="Feature hash buckets.")
@click.option("--batch-size", type=int, default=None,
              help="Mini-batch size (full batch when omitted).")
def train(data_path, out, config_path, mode, h, k, window_len, stride,
          num_speakers, learning_rate, epochs, l2, buckets, batch_size):
    """Train the builtin baseline and write a model file."""
    config = _load_config(config_path)
    mode = _setting(mode, config, "mode", "mpm")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    kwargs = {}
    lr = _setting(learning_rate, config, "learning_rate", None)
    if lr is not None:
        kwargs["learning_rate"] = float(lr)
    ep = _setting(epochs, config, "epochs", None)
    if ep is not None:
        kwargs["epochs"] = int(ep)
    reg = _setting(l2, config, "l2", None)
    if reg is not None:
        kwargs["l2"] = float(reg)
    nb = _setting(buckets, config, "buckets", None)
    if nb is not None:
        kwargs["n_buckets"] = int(nb)
    bs = _setting(batch_size, config, "batch_size", None)
    if bs is not None:
        kwargs["batch_size"] = int(bs)
    train_config = TrainConfig(**kwargs)
    convs = _read_transcripts(data_path)
    h = int(_setting(h, config, "h", DEFAULT_H))
    k = int(_setting(k, config, "k", DEFAULT_K))
    window_len = int(_setting(window_len, config, "window_len",
                              DEFAULT_WINDOW_LEN))
    stride = int(_setting(stride, config, "stride", DEFAULT_STRIDE))
    if mode == "spm":
        result = train_baseline_spm(spm_training_data(convs, h, k),
                                    train_config)
    elif mode == "mpm":
        result = train_baseline_mpm(
            mpm_training_data(convs, window_len, stride), train_config)
    else:
        observed = sorted({lab for c in convs
                           for lab in (c.speakers.labels if c.speakers else ())})
        p = _setting(num_speakers, config, "num_speakers", None)
        p = len(observed) if p is None else int(p)
        if p != len(observed):
            click.echo(
                f"warning: config requests {p} speakers but the data "
                f"contains {len(observed)} distinct labels", err=True)
        if p < len(observed):
            raise ValidationError(
                f"cannot train {p} label channels on data with "
                f"{len(observed)} distinct labels")
        data = multispeaker_training_data(convs, window_len, stride, observed)
        result = train_baseline_multispeaker(data, p, train_config)
    save_model(result.model, out)
    click.echo(f"initial loss: {result.initial_loss:.6f}")
    click.echo(f"final loss:   {result.final_loss:.6f} "
               f"(with regularizer: {result.final_regularized_loss:.6f})")
    click.echo(f"model written to {out}")


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

def _predictor_options(fn):
    fn = click.option("--model", "model_path", type=str, default=None,
                      help="Builtin model file.")(fn)
    fn = click.option("--endpoint", type=str, default=None,
                      help="Remote predictor base URL.")(fn)
    fn = click.option("--oracle-error", type=float, default=None,
                      help="Use a gold-corrupting oracle with this error "
                           "rate (requires gold speakers in the input).")(fn)
    fn = click.option("--oracle-confidence", type=float, default=0.9,
                      show_default=True,
                      help="Probability the oracle emits for its vote.")(fn)
    fn = click.option("--oracle-correlated", type=float, default=None,
                      help="Fraction of change points the oracle gets wrong "
                           "in every window.  [default: 0]")(fn)
    return fn


def _window_options(fn):
    fn = click.option("--window-len", type=int, default=None,
                      help=f"Window length.  [default: {DEFAULT_WINDOW_LEN}]")(fn)
    fn = click.option("--stride", type=int, default=None,
                      help=f"Window stride.  [default: {DEFAULT_STRIDE}]")(fn)
    fn = click.option("--h", "h", type=int, default=None,
                      help=f"Left context (spm).  [default: {DEFAULT_H}]")(fn)
    fn = click.option("--k", "k", type=int, default=None,
                      help=f"Right context (spm).  [default: {DEFAULT_K}]")(fn)
    fn = click.option("--method", type=click.Choice(AGGREGATION_METHODS),
                      default=None, help="Vote aggregation.  "
                      "[default: majority]")(fn)
    fn = click.option("--threshold", type=float, default=None,
                      help="Decision threshold.  [default: 0.5]")(fn)
    return fn


def _resolve_run_settings(config, mode, h, k, window_len, stride, seed, jobs):
    mode = _setting(mode, config, "mode", "mpm")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    return (
        mode,
        int(_setting(h, config, "h", DEFAULT_H)),
        int(_setting(k, config, "k", DEFAULT_K)),
        int(_setting(window_len, config, "window_len", DEFAULT_WINDOW_LEN)),
        int(_setting(stride, config, "stride", DEFAULT_STRIDE)),
        int(_setting(seed, config, "seed", 0)),
        int(_setting(jobs, config, "jobs", 1)),
    )


def _make_spec(config, mode, model_path, endpoint, oracle_error,
               oracle_confidence, oracle_correlated, seed, jobs):
    return _PredictorSpec(
        mode,
        _setting(model_path, config, "model", None),
        _setting(endpoint, config, "endpoint", None),
        _setting(oracle_error, config, "oracle_error", None),
        float(_setting(None, config, "oracle_confidence", oracle_confidence)),
        float(_setting(oracle_correlated, config, "oracle_correlated", 0.0)),
        seed, jobs)


@cli.command()
@click.option("--data", "data_path", type=str, required=True,
              help="Input transcripts.")
@click.option("-o", "--out", type=str, default=None,
              help="Prediction records output (stdout when omitted).")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--mode", type=click.Choice(MODES), default=None,
              help="Pipeline.  [default: mpm]")
@_predictor_options
@_window_options
@click.option("--seed", type=int, default=None, help="Oracle seed.  [default: 0]")
@click.option("--jobs", type=int, default=None,
              help="Worker threads over conversations.  [default: 1]")
def predict(data_path, out, config_path, mode, model_path, endpoint,
            oracle_error, oracle_confidence, oracle_correlated, window_len,
            stride, h, k, method, threshold, seed, jobs):
    """Predict speaker changes (or labels) for every conversation."""
    config = _load_config(config_path)
    mode, h, k, window_len, stride, seed, jobs = _resolve_run_settings(
        config, mode, h, k, window_len, stride, seed, jobs)
    policy = _make_policy(method, threshold, config)
    spec = _make_spec(config, mode, model_path, endpoint, oracle_error,
                      oracle_confidence, oracle_correlated, seed, jobs)
    convs = _read_transcripts(data_path)

    failures: list[tuple[str, Exception]] = []

    def one(conv: Conversation):
        try:
            return _predict_one(spec, conv, h, k, window_len, stride, policy)
        except (ProtocolError, TransportError) as exc:
            return (conv.id, exc)

    results = _parallel(convs, one, jobs)
    records = []
    for item in results:
        if isinstance(item, tuple):
            failures.append(item)
        else:
            records.append(item)
    records.sort(key=lambda r: r["id"])
    _write_records(records, out)
    for conv_id, exc in sorted(failures, key=lambda f: f[0]):
        click.echo(f"error: conversation {conv_id!r}: {exc}", err=True)
    if failures:
        raise ProtocolError(
            f"{len(failures)} of {len(convs)} conversations failed; "
            f"results for the rest were written")
    if out is not None:
        click.echo(f"wrote {len(records)} prediction records to {out}",
                   err=True)


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--gold", "gold_path", type=str, required=True,
              help="Gold transcripts (with speakers).")
@click.option("--predictions", "pred_path", type=str, default=None,
              help="Prediction records or labeled transcripts to score.")
@click.option("-o", "--out", type=str, default=None,
              help="Report JSON output path.")
@click.option("--series", "series_path", type=str, default=None,
              help="Per-bucket JSONL series output.")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--mode", type=click.Choice(MODES), default=None,
              help="Pipeline when predicting in-process.  [default: mpm]")
@_predictor_options
@_window_options
@click.option("--bucket-mode", type=click.Choice(BUCKET_MODES), default=None,
              help="Length-bucketed breakdown.")
@click.option("--edges", type=str, default=None,
              help="Comma-separated bucket edges.")
@click.option("--sweep", type=str, default=None,
              help="Comma-separated window lengths; runs one in-process "
                   "prediction + report per length.")
@click.option("--seed", type=int, default=None, help="Oracle seed.  [default: 0]")
@click.option("--jobs", type=int, default=None,
              help="Worker threads over conversations.  [default: 1]")
def evaluate(gold_path, pred_path, out, series_path, config_path, mode,
             model_path, endpoint, oracle_error, oracle_confidence,
             oracle_correlated, window_len, stride, h, k, method, threshold,
             bucket_mode, edges, sweep, seed, jobs):
    """Score predictions against gold transcripts (WDER, WDER-S)."""
    config = _load_config(config_path)
    mode, h, k, window_len, stride, seed, jobs = _resolve_run_settings(
        config, mode, h, k, window_len, stride, seed, jobs)
    policy = _make_policy(method, threshold, config)
    bucket_mode = _setting(bucket_mode, config, "bucket_mode", None)
    edge_list = _parse_edges(_setting(edges, config, "edges", None))
    gold = _read_transcripts(gold_path)
    gold_by_id = {c.id: c for c in gold}
    for c in gold:
        if c.speakers is None:
            raise ValidationError(
                f"gold conversation {c.id!r} is missing speaker labels")

    if pred_path is not None and sweep is not None:
        raise ConfigError("--sweep re-predicts in-process; it cannot be "
                          "combined with --predictions")

    def report_pairs(pairs) -> WderReport:
        return evaluate_pairs(pairs, bucket_mode, edge_list)

    if pred_path is not None:
        hyps = _read_predictions(pred_path, gold_by_id)
        missing = sorted(set(gold_by_id) - set(hyps))
        extra = sorted(set(hyps) - set(gold_by_id))
        if extra:
            raise ValidationError(
                f"predictions for unknown conversations: {', '.join(extra)}")
        if missing:
            click.echo(
                f"warning: no predictions for {len(missing)} of "
                f"{len(gold)} conversations: {', '.join(missing)}", err=True)
        ids = sorted(hyps)
        if not ids:
            raise ValidationError("no conversations to evaluate")
        report = report_pairs([(gold_by_id[i], hyps[i]) for i in ids])
        _emit_report(report, out, series_path)
        return

    spec = _make_spec(config, mode, model_path, endpoint, oracle_error,
                      oracle_confidence, oracle_correlated, seed, jobs)
    sweep_lens = [window_len]
    if sweep is not None:
        try:
            sweep_lens = [int(part) for part in sweep.split(",") if part.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad sweep list {sweep!r}: {exc}") from exc
        if not sweep_lens:
            raise ConfigError("empty sweep list")
        if mode == "spm":
            raise ConfigError("--sweep varies window length; it applies to "
                              "mpm/multispeaker modes")

    for wl in sweep_lens:
        def one(conv: Conversation):
            record = _predict_one(spec, conv, h, k, wl, stride, policy)
            return score_pair(conv, _hyp_from_prediction(conv, record))

        scores = _parallel(gold, one, jobs)
        scores.sort(key=lambda s: s.conversation_id)
        report = build_report(scores, bucket_mode, edge_list)
        if sweep is not None:
            click.echo(f"window_len={wl}")
        target = out
        if target is not None and len(sweep_lens) > 1:
            path = Path(target)
            target = str(path.with_name(f"{path.stem}-w{wl}{path.suffix}"))
        series = series_path
        if series is not None and len(sweep_lens) > 1:
            path = Path(series)
            series = str(path.with_name(f"{path.stem}-w{wl}{path.suffix}"))
        _emit_report(report, target, series)


def _emit_report(report: WderReport, out: str | None,
                 series_path: str | None) -> None:
    click.echo(format_report_table(report))
    if out is not None:
        write_report(report, out)
        click.echo(f"report written to {out}", err=True)
    if series_path is not None:
        if not report.buckets:
            raise ConfigError("--series needs --bucket-mode")
        write_bucket_series(report, series_path)


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--gold", "gold_path", type=str, required=True,
              help="Gold transcripts (with speakers).")
@click.option("-o", "--out", type=str, default=None,
              help="Efficacy report JSON output.")
@click.option("--slices", "slices_path", type=str, default=None,
              help="Error-slice JSONL output.")
@click.option("--config", "config_path", type=str, default=None)
@_predictor_options
@_window_options
@click.option("--radius", type=int, default=None,
              help="Sentences of context around each error.  [default: 2]")
@click.option("--sample", type=int, default=None,
              help="Keep a seeded random sample of this many slices.")
@click.option("--seed", type=int, default=None,
              help="Oracle + sampling seed.  [default: 0]")
@click.option("--jobs", type=int, default=None,
              help="Worker threads over conversations.  [default: 1]")
def analyze(gold_path, out, slices_path, config_path, model_path, endpoint,
            oracle_error, oracle_confidence, oracle_correlated, window_len,
            stride, h, k, method, threshold, radius, sample, seed, jobs):
    """Vote-efficacy breakdown of an MPM run, plus error slices."""
    config = _load_config(config_path)
    _, h, k, window_len, stride, seed, jobs = _resolve_run_settings(
        config, "mpm", h, k, window_len, stride, seed, jobs)
    policy = _make_policy(method, threshold, config)
    radius = int(_setting(radius, config, "radius", 2))
    sample = _setting(sample, config, "sample", None)
    spec = _make_spec(config, "mpm", model_path, endpoint, oracle_error,
                      oracle_confidence, oracle_correlated, seed, jobs)
    convs = _read_transcripts(gold_path)
    for c in convs:
        if c.speakers is None:
            raise ValidationError(
                f"conversation {c.id!r} is missing gold speakers")

    def one(conv: Conversation):
        record, run = _predict_one(spec, conv, h, k, window_len, stride,
                                   policy, want_votes=True)
        gold_changes = derive_change_sequence(conv.speakers)
        eff = efficacy_analysis(run.vote_sets, run.changes, gold_changes,
                                policy)
        hyp = _hyp_from_prediction(conv, record)
        return conv.id, eff, (conv, hyp)

    results = _parallel(convs, one, jobs)
    results.sort(key=lambda r: r[0])
    efficacy = merge_efficacy([r[1] for r in results])
    pairs = [r[2] for r in results]
    slices = export_errors(pairs, radius=radius,
                           sample=None if sample is None else int(sample),
                           seed=seed)
    pct = efficacy.percentages
    click.echo(f"change points with a wrong vote: {efficacy.total}")
    click.echo(f"  partially incorrect, aggregated to correct:   "
               f"{efficacy.partial_to_correct:6d}  ({pct[0]:5.1f}%)")
    click.echo(f"  partially incorrect, aggregated to incorrect: "
               f"{efficacy.partial_to_incorrect:6d}  ({pct[1]:5.1f}%)")
    click.echo(f"  consistently incorrect:                       "
               f"{efficacy.consistently_incorrect:6d}  ({pct[2]:5.1f}%)")
    click.echo(f"error slices: {len(slices)}")
    if out is not None:
        payload = {
            "total_with_wrong_vote": efficacy.total,
            "partial_to_correct": efficacy.partial_to_correct,
            "partial_to_incorrect": efficacy.partial_to_incorrect,
            "consistently_incorrect": efficacy.consistently_incorrect,
            "percentages": {
                "partial_to_correct": pct[0],
                "partial_to_incorrect": pct[1],
                "consistently_incorrect": pct[2],
            },
        }
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        click.echo(f"report written to {out}", err=True)
    if slices_path is not None:
        with open(slices_path, "w", encoding="utf-8") as fh:
            for s in slices:
                fh.write(json.dumps(s, sort_keys=True) + "\n")
        click.echo(f"slices written to {slices_path}", err=True)


def main(argv=None) -> int:
    """Console entry point with exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 130
    except click.UsageError as exc:
        exc.show()
        return EXIT_CONFIG
    except click.ClickException as exc:
        exc.show()
        return 1
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        return EXIT_CONFIG
    except (TransportError, ProtocolError) as exc:
        click.echo(f"predictor error: {exc}", err=True)
        return EXIT_PROTOCOL
    except ValidationError as exc:
        click.echo(f"validation error: {exc}", err=True)
        return EXIT_VALIDATION
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
