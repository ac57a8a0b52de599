"""Exception hierarchy.

Every error carries enough context to be rendered as a one-line record by the
CLI; numeric validation errors also expose the offending ``magnitude``.
"""


class QrecallError(Exception):
    """Base class for all library errors."""


class StructureError(QrecallError, ValueError):
    """Shapes, alphabets or label counts do not line up."""


class PreconditionError(QrecallError, ValueError):
    """An operation was called on an input outside its domain."""


class ParseError(QrecallError, ValueError):
    """A document could not be turned into a domain value."""


class UsageError(QrecallError, ValueError):
    """Unknown command, example name or option value."""


class ConstructionError(QrecallError, ValueError):
    """A quantum construction cannot be carried out for the given data."""


class UnsupportedDimensionError(QrecallError, ValueError):
    """Requested computation is only implemented for other dimensions."""


class ValidationError(QrecallError, ValueError):
    """A numeric invariant is violated; ``magnitude`` is the measured value."""

    check = "validation"

    def __init__(self, message, magnitude):
        super().__init__(message)
        self.magnitude = float(magnitude)


class NormalizationError(ValidationError):
    check = "normalization"


class NegativityError(ValidationError):
    check = "nonnegativity"


class HermiticityError(ValidationError):
    check = "hermiticity"


class TraceError(ValidationError):
    check = "trace"


class PositivityError(ValidationError):
    check = "positivity"


class CompletenessError(ValidationError):
    check = "completeness"


class NormalizationDriftError(ValidationError):
    """Born-rule output drifted away from unit mass; the model is suspect."""

    check = "normalization-drift"


class ImaginaryResidueError(ValidationError):
    """Born-rule trace left a non-negligible imaginary part."""

    check = "imaginary-residue"
