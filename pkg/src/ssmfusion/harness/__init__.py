"""Everything around the model: file formats, data, training, diagnostics, CLI."""

from .erf import erf_map, model_erf_map, random_model_erf, support_fraction
from .metrics import Metrics, confusion_matrix, metrics_from_confusion
from .synth import Manifest, SplitError, load_manifest, synth_generate
from .tensorfile import (
    FormatError,
    read_container,
    read_labels,
    read_tensor,
    write_container,
    write_labels,
    write_tensor,
)
from .train import (
    PatchDataset,
    TrainConfig,
    TrainingDiverged,
    TrainResult,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)

__all__ = [
    "FormatError",
    "Manifest",
    "Metrics",
    "PatchDataset",
    "SplitError",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "confusion_matrix",
    "erf_map",
    "evaluate",
    "load_checkpoint",
    "load_manifest",
    "metrics_from_confusion",
    "model_erf_map",
    "random_model_erf",
    "read_container",
    "read_labels",
    "read_tensor",
    "save_checkpoint",
    "support_fraction",
    "synth_generate",
    "train",
    "write_container",
    "write_labels",
    "write_tensor",
]
