"""Typed failures raised across the laboratory."""
from __future__ import annotations


class ProductAeError(Exception):
    """Root of every error raised by productae."""


class ShapeError(ProductAeError, ValueError):
    """Tensor dimensions do not fit the layer or decoder stage consuming them."""


class GraphUsageError(ProductAeError, RuntimeError):
    """Reverse-mode pass requested on something that was never recorded."""


class DegenerateInputError(ProductAeError, ValueError):
    """Input outside the operation's domain (zero-norm codeword, non-binary bits)."""


class ConfigurationError(ProductAeError, ValueError):
    """Inconsistent or incomplete configuration."""


class TrainingDivergedError(ProductAeError, RuntimeError):
    """Non-finite loss or gradient; carries the schedule coordinates."""

    def __init__(self, message: str, *, epoch: int, iteration: int, schedule: str) -> None:
        super().__init__(f"{message} (epoch={epoch}, schedule={schedule}, iteration={iteration})")
        self.epoch = epoch
        self.iteration = iteration
        self.schedule = schedule


class CheckpointError(ProductAeError, ValueError):
    """Base for checkpoint file problems."""


class BadMagicError(CheckpointError):
    """File does not start with the checkpoint magic bytes."""


class UnsupportedVersionError(CheckpointError):
    """Checkpoint format version is not understood by this build."""


class TruncatedPayloadError(CheckpointError):
    """Payload length disagrees with the header."""

    def __init__(self, expected: int, actual: int) -> None:
        super().__init__(f"checkpoint payload is {actual} bytes, expected {expected}")
        self.expected = expected
        self.actual = actual


class HeaderParseError(CheckpointError):
    """Header is not a valid JSON document of the expected shape."""


class DimensionMismatchError(CheckpointError):
    """Layer dimensions recorded in the header disagree with the code spec they claim."""


class NonFiniteGradientError(ProductAeError, FloatingPointError):
    """An optimizer was handed a NaN or infinite gradient."""
