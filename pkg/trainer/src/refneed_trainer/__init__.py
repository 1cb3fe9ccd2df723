"""Training, quantization, and export for citation-need classifiers."""

from .config import DEFAULT_BASE_MODEL, SCRATCH_BASE, TrainConfig
from .data import as_records, features_and_labels, load_split, train_wordpiece
from .errors import BaseModelError, CheckpointError, DataSchemaError, TrainerError
from .export import (
    export_bundle,
    prediction_agreement,
    quantize_dynamic,
    save_quantized_checkpoint,
)
from .train import (
    Checkpoint,
    TrainedClassifier,
    fine_tune,
    load_checkpoint,
    save_checkpoint,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_BASE_MODEL",
    "SCRATCH_BASE",
    "TrainConfig",
    "as_records",
    "features_and_labels",
    "load_split",
    "train_wordpiece",
    "BaseModelError",
    "CheckpointError",
    "DataSchemaError",
    "TrainerError",
    "export_bundle",
    "prediction_agreement",
    "quantize_dynamic",
    "save_quantized_checkpoint",
    "Checkpoint",
    "TrainedClassifier",
    "fine_tune",
    "load_checkpoint",
    "save_checkpoint",
    "__version__",
]
