"""Exception types shared across the package."""


class AbkdError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(AbkdError):
    """Shape or structure of an input violates an operation's contract."""


class ShapeError(StructuralError):
    """Dimension mismatch between operands."""


class DegenerateDegreeError(AbkdError):
    """A node has zero degree where a positive degree is required."""


class DegenerateVectorError(AbkdError):
    """A zero-norm vector where a direction is required (cosine distance)."""


class ParseError(AbkdError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class EmptyDatasetError(AbkdError):
    """Dataset with zero nodes."""


class ParameterError(AbkdError):
    """Invalid parameter value."""


class DomainError(AbkdError):
    """Value outside the mathematical domain of an operation."""


class ContractError(AbkdError):
    """Caller violated an API contract (empty mask, non-scalar loss, ...)."""


class NumericError(AbkdError):
    """Non-finite value encountered during computation."""


class ConfigError(AbkdError):
    """Invalid experiment configuration or missing run artifact."""


class TrainingDivergedError(AbkdError):
    """Training loss became non-finite."""
