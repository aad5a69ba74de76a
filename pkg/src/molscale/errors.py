"""Exception hierarchy for molscale.

Every error carries a stable ``code`` (used in log lines and JSON reports) and the
process exit code the CLI returns when the error escapes a command.
"""

from typing import Optional


class MolscaleError(Exception):
    """Base class for all molscale errors."""

    code: str = "ERROR"
    exit_code: int = 2

    def __init__(self, message: str, *, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(MolscaleError):
    """A record could not be parsed."""

    code = "PARSE_ERROR"


class RangeError(MolscaleError):
    """A feature code lies outside its vocabulary, or a graph invariant is broken."""

    code = "RANGE_ERROR"


class DatasetIOError(MolscaleError):
    """A dataset or table file could not be read or written."""

    code = "IO_ERROR"


class EmptyTableError(MolscaleError):
    code = "EMPTY_TABLE"


class MoleculeTooLargeError(MolscaleError):
    code = "MOLECULE_TOO_LARGE"


class ShapeMismatchError(MolscaleError, ValueError):
    code = "SHAPE_MISMATCH"


class NotScalarError(MolscaleError):
    code = "NOT_SCALAR"


class NoMaskedAtomsError(MolscaleError):
    code = "NO_MASKED_ATOMS"


class NanGradientError(MolscaleError):
    """A parameter received a non-finite gradient; the optimizer step was aborted."""

    code = "NAN_GRADIENT"
    exit_code = 4

    def __init__(self, parameter: str):
        self.parameter = parameter
        super().__init__(f"non-finite gradient for parameter {parameter}")


class CheckpointIOError(MolscaleError):
    code = "CHECKPOINT_IO"


class InsufficientDataError(MolscaleError):
    code = "INSUFFICIENT_DATA"
    exit_code = 3


class DomainError(MolscaleError):
    code = "DOMAIN_ERROR"


class ConfigError(MolscaleError):
    """Invalid or unknown configuration key."""

    code = "CONFIG_ERROR"


class GradientCheckError(MolscaleError):
    code = "GRADCHECK_FAILED"
    exit_code = 4
