"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: parse errors exit 2, precondition and
structural errors exit 3, numerical failures exit 4.
"""


class ConfevadeError(Exception):
    """Base class for all library errors."""


class ParseError(ConfevadeError):
    """Malformed input file (JSON model, CSV dataset, report)."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class PreconditionError(ConfevadeError, ValueError):
    """An operation was called with arguments outside its contract."""


class StructuralError(PreconditionError):
    """Vector length does not match the variability model."""


class SamplingExhaustedError(ConfevadeError):
    """Rejection sampling could not satisfy the cross constraints."""


class AugmentationError(ConfevadeError):
    """Centroid balancing could not find a never-seen-before row."""


class InversionError(ConfevadeError):
    """A dummified row is not one-hot and cannot be mapped back."""


class NumericalError(ConfevadeError):
    """Base for failures of the numerical routines."""


class TrainingError(NumericalError):
    """The classifier cannot be trained on the given data."""


class DegenerateGradientError(NumericalError):
    """The discriminant gradient vanishes, so no attack direction exists."""


class CalibrationError(NumericalError):
    """Oracle scores are constant, so no threshold separates them."""
