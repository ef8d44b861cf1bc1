"""Toolkit for building and evaluating anonymous-speaker-guessing benchmarks.

The pipeline: parse raw episode transcripts into scenes, mask the main
characters behind per-scene shuffled speaker IDs, train character models
that score each ID against the show's roster, then evaluate accuracy with
per-axis breakdowns, agreement statistics, and history retrieval.
"""

from .anonymize import MaskedInstanceSet, MaskedLine, anonymize_corpus, anonymize_scene
from .annotations import AnnotationRecord, EvidenceLabel, agreement_report, cohen_kappa, validate_annotation
from .dataset import SplitSpec, compute_stats, read_corpus, split_corpus, write_corpus
from .encoder import EncoderConfig, Vocab, encode, gradient_check
from .evaluate import PredictionRecord, breakdown, instance_accuracy, random_baseline, scene_macro_accuracy
from .models import CharModel, MrConfig, load_model, save_model
from .parsing import AliasTable, Line, RuleConfig, Scene, parse_episode
from .retrieval import recall_at_k, retrieve_history
from .synth import SynthConfig, generate_corpus
from .training import TrainConfig, learning_curve, predict_records, train

__version__ = "0.1.0"

__all__ = [
    "AliasTable",
    "AnnotationRecord",
    "CharModel",
    "EncoderConfig",
    "EvidenceLabel",
    "Line",
    "MaskedInstanceSet",
    "MaskedLine",
    "MrConfig",
    "PredictionRecord",
    "RuleConfig",
    "Scene",
    "SplitSpec",
    "SynthConfig",
    "TrainConfig",
    "Vocab",
    "agreement_report",
    "anonymize_corpus",
    "anonymize_scene",
    "breakdown",
    "cohen_kappa",
    "compute_stats",
    "encode",
    "generate_corpus",
    "gradient_check",
    "instance_accuracy",
    "learning_curve",
    "load_model",
    "parse_episode",
    "predict_records",
    "random_baseline",
    "read_corpus",
    "recall_at_k",
    "retrieve_history",
    "save_model",
    "scene_macro_accuracy",
    "split_corpus",
    "train",
    "validate_annotation",
    "write_corpus",
    "__version__",
]
