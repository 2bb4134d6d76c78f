"""Exception types shared across the package."""


class SimpkitError(Exception):
    """Base class for all package errors."""


class EmptyInput(SimpkitError):
    """An operation received empty text, an empty sequence, or an empty corpus."""


class InvalidOrder(SimpkitError):
    """N-gram order outside the supported range 1..4."""


class InvalidConfig(SimpkitError):
    """A configuration value violates its documented constraints."""


class ShapeError(SimpkitError):
    """Tensor or feature dimensions do not match the declared layout."""


class TrainingDiverged(SimpkitError):
    """A gradient or parameter became NaN/Inf during optimization."""


class ModelNotReady(SimpkitError):
    """A trained model is required but missing or untrained."""


class MissingReference(SimpkitError):
    """A metric that needs at least one reference received none."""


class DegenerateTraining(SimpkitError):
    """Training data cannot produce a single valid ranking pair."""


class ParseError(SimpkitError):
    """A corpus record could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message if line_number is None else f"line {line_number}: {message}")
        self.line_number = line_number
