"""Text-only speaker diarization via sentence-level change detection.

The package predicts where the speaker changes between consecutive
sentences of a transcript, aggregates overlapping predictions into a
single diarization, and scores the result word-by-word against a
reference. Everything operates on text alone; no audio is involved.
"""

from .aggregation import (AGGREGATION_METHODS, AggregationPolicy,
                          EfficacyReport, MpmRunResult, VoteSet,
                          aggregate_votes, collect_votes, efficacy_analysis,
                          expected_error_with_correlation,
                          expected_majority_error, merge_efficacy, run_mpm,
                          run_spm)
from .alignment import (AlignmentColumn, AlignmentScores, TokenStream,
                        WordAlignment, align_and_label, align_words,
                        label_sentences, normalize_token, transfer_speakers)
from .errors import (ConfigError, ParseError, ProtocolError, TextDiarError,
                     TransportError, ValidationError)
from .features import (FeatureVector, FeaturizerConfig, featurize,
                       featurize_sentence, jaccard_overlap, stack_features,
                       tokens)
from .metrics import (BucketScore, ConversationScore, WderReport,
                      bucket_report, build_report, evaluate_pairs,
                      export_errors, format_report_table,
                      optimal_speaker_mapping, report_to_dict,
                      score_conversation, score_pair, wder, wder_s,
                      word_labels, write_bucket_series, write_report)
from .multispeaker import (MultispeakerRunResult, SpeakerLabelSet,
                           WindowLabeling, agreement_matrix,
                           aggregate_multispeaker, compose_mappings,
                           match_labels, predict_window_labels,
                           run_multispeaker, unify_labels)
from .predictor import (LinearChangePredictor, MultispeakerPredictor,
                        Predictor, TrainConfig, TrainResult, WindowPrediction,
                        gradient, load_model, mpm_training_data,
                        multispeaker_training_data, objective, predict_mpm,
                        predict_spm, save_model, spm_training_data,
                        train_baseline_mpm, train_baseline_multispeaker,
                        train_baseline_spm)
from .remote import RemotePredictor
from .synth import (NoisyOracle, PermutedLabelOracle, SynthConfig,
                    generate_conversation, generate_corpus)
from .transcript import (CANONICAL_LABELS, ChangeSequence, Conversation,
                         Sentence, SpeakerAssignment, conversation_to_record,
                         decode_speakers, derive_change_sequence,
                         parse_transcripts, segment_sentences,
                         write_transcripts)
from .windowing import (MpmWindow, SpmContext, WindowSet, build_mpm_windows,
                        build_spm_contexts, windows_for_conversation)

__version__ = "0.1.0"

__all__ = [
    "AGGREGATION_METHODS", "AggregationPolicy", "AlignmentColumn",
    "AlignmentScores", "CANONICAL_LABELS", "ChangeSequence", "ConfigError",
    "Conversation", "ConversationScore", "EfficacyReport", "FeatureVector",
    "FeaturizerConfig", "LinearChangePredictor", "MpmRunResult", "MpmWindow",
    "MultispeakerPredictor", "MultispeakerRunResult", "NoisyOracle",
    "ParseError", "PermutedLabelOracle", "Predictor", "ProtocolError",
    "RemotePredictor", "Sentence", "SpeakerAssignment", "SpeakerLabelSet",
    "SpmContext", "SynthConfig", "TextDiarError", "TokenStream", "TrainConfig",
    "TrainResult", "TransportError", "ValidationError", "VoteSet",
    "WderReport", "WindowLabeling", "WindowPrediction", "WindowSet",
    "WordAlignment", "BucketScore", "aggregate_multispeaker",
    "aggregate_votes", "agreement_matrix", "align_and_label", "align_words",
    "bucket_report", "build_mpm_windows", "build_report",
    "build_spm_contexts", "collect_votes", "compose_mappings",
    "conversation_to_record", "decode_speakers", "derive_change_sequence",
    "efficacy_analysis", "expected_error_with_correlation",
    "expected_majority_error", "evaluate_pairs", "export_errors",
    "featurize", "featurize_sentence", "format_report_table",
    "generate_conversation", "generate_corpus", "gradient",
    "jaccard_overlap", "label_sentences", "load_model", "match_labels",
    "merge_efficacy", "mpm_training_data", "multispeaker_training_data",
    "normalize_token", "objective", "optimal_speaker_mapping",
    "parse_transcripts", "predict_mpm", "predict_spm",
    "predict_window_labels", "report_to_dict", "run_mpm", "run_multispeaker",
    "run_spm", "save_model", "score_conversation", "score_pair",
    "segment_sentences", "spm_training_data", "stack_features", "tokens",
    "train_baseline_mpm", "train_baseline_multispeaker", "train_baseline_spm",
    "transfer_speakers", "unify_labels", "wder", "wder_s", "word_labels",
    "windows_for_conversation", "write_bucket_series", "write_report",
    "write_transcripts",
]
