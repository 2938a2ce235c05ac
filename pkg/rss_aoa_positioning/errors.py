"""Exceptions raised by the positioning package."""

from __future__ import annotations


class PositioningError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PositioningError, ValueError):
    """Invalid configuration, inconsistent dimensions or bad user input."""


class DegenerateGeometryError(PositioningError, ValueError):
    """Target and anchor coincide, so angles and distances are undefined."""


class SingularGeometryError(PositioningError):
    """The (weighted) linear system is rank deficient."""

    def __init__(self, message: str, condition_estimate: float) -> None:
        super().__init__(message)
        self.condition_estimate = condition_estimate


class TrainingDivergedError(PositioningError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: int) -> None:
        super().__init__(message)
        self.epoch = epoch


class DatasetFormatError(PositioningError):
    """A dataset file is corrupted or has an unsupported version."""


class CheckpointFormatError(PositioningError):
    """A model checkpoint is corrupted, has an unsupported version or wrong dimensions."""


class SweepAbortedError(PositioningError):
    """Too many singular-geometry trials at a sweep point."""
