"""Exception types raised by the training and export pipeline."""


class TrainerError(Exception):
    """Base class for all errors raised by this package."""


class DataSchemaError(TrainerError):
    """Training records do not conform to the corpus record schema."""


class CheckpointError(TrainerError):
    """A checkpoint directory is missing files or cannot be read."""


class BaseModelError(TrainerError):
    """The requested base model cannot be resolved or loaded."""
