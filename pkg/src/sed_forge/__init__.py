"""sed-forge: polyphonic sound event detection with hand-rolled networks."""

from .audio import AudioClip, read_wav, write_wav
from .errors import (AnnotationError, ConfigError, CorruptFileError, DivergedError,
                     EmptyInputError, EngineStateError, ManifestError, RecipeError,
                     SedForgeError, ShapeError, StageError, UndefinedMetricError,
                     UnsupportedVersionError)
from .events import (EventAnnotation, EventRoll, build_target_matrix, format_annotations,
                     parse_annotations, read_annotation_file, roll_to_events,
                     write_annotation_file)
from .experiment import (CompareResult, ExperimentConfig, ExperimentResult,
                         compare_architectures, run_experiment, visualize_filters)
from .features import (FeatureConfig, FeatureMatrix, MelFilterbank, NormStats,
                       build_mel_filterbank, compute_norm_stats, extract_features,
                       hz_to_mel, log_mel, mel_to_hz, normalize, split_sequences,
                       stft_magnitude)
from .inference import (ActivityProbabilities, DetectionResult, binarize, detect_events,
                        load_probabilities, predict, predict_chunk, save_probabilities)
from .losses import bce_loss
from .manifest import DatasetManifest, RecordingEntry, load_manifest, write_manifest
from .metrics import (EerResult, SegmentStats, SegmentedComparison, accumulate_stats, eer,
                      error_rate_from_stats, f1_from_stats, legacy_f1,
                      one_second_segment_frames, scene_average, segment_rolls)
from .modelio import TrainedModel, load_model, save_model
from .nn import (AscentResult, ConvSpec, DenseSpec, Network, NetworkPlan, NetworkSpec,
                 RecurrentSpec, TemporalMaxPoolSpec, input_gradient_ascent)
from .optim import Adam
from .synth import (EventBank, MixtureRecipe, SynthConfig, builtin_event_bank,
                    generate_dataset, synthesize_mixture)
from .training import (TrainConfig, TrainLog, load_checkpoint, save_checkpoint, train)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "ActivityProbabilities",
    "AnnotationError",
    "AscentResult",
    "AudioClip",
    "CompareResult",
    "ConfigError",
    "ConvSpec",
    "CorruptFileError",
    "DatasetManifest",
    "DenseSpec",
    "DetectionResult",
    "DivergedError",
    "EerResult",
    "EmptyInputError",
    "EngineStateError",
    "EventAnnotation",
    "EventBank",
    "EventRoll",
    "ExperimentConfig",
    "ExperimentResult",
    "FeatureConfig",
    "FeatureMatrix",
    "ManifestError",
    "MelFilterbank",
    "MixtureRecipe",
    "Network",
    "NetworkPlan",
    "NetworkSpec",
    "NormStats",
    "RecipeError",
    "RecordingEntry",
    "RecurrentSpec",
    "SedForgeError",
    "SegmentStats",
    "SegmentedComparison",
    "ShapeError",
    "StageError",
    "SynthConfig",
    "TemporalMaxPoolSpec",
    "TrainConfig",
    "TrainLog",
    "TrainedModel",
    "UndefinedMetricError",
    "UnsupportedVersionError",
    "accumulate_stats",
    "bce_loss",
    "binarize",
    "build_mel_filterbank",
    "build_target_matrix",
    "builtin_event_bank",
    "compare_architectures",
    "compute_norm_stats",
    "detect_events",
    "eer",
    "error_rate_from_stats",
    "extract_features",
    "f1_from_stats",
    "format_annotations",
    "generate_dataset",
    "hz_to_mel",
    "input_gradient_ascent",
    "legacy_f1",
    "load_checkpoint",
    "load_manifest",
    "load_model",
    "load_probabilities",
    "log_mel",
    "mel_to_hz",
    "normalize",
    "one_second_segment_frames",
    "parse_annotations",
    "predict",
    "predict_chunk",
    "read_annotation_file",
    "read_wav",
    "roll_to_events",
    "run_experiment",
    "save_checkpoint",
    "save_model",
    "save_probabilities",
    "scene_average",
    "segment_rolls",
    "split_sequences",
    "stft_magnitude",
    "synthesize_mixture",
    "train",
    "visualize_filters",
    "write_annotation_file",
    "write_manifest",
    "write_wav",
]
