"""Exception hierarchy.

Every error carries a short machine-readable ``code`` used by the CLI when
reporting on stderr (``ERROR:<code>:<message>``).
"""


class LooseRopeError(Exception):
    code = "Error"


class ValidationError(LooseRopeError, ValueError):
    code = "ValidationError"


class DimensionMismatch(ValidationError):
    code = "DimensionMismatch"


class NonFiniteInput(ValidationError):
    code = "NonFiniteInput"


class EmptyInput(ValidationError):
    code = "EmptyInput"


class InvalidKernel(ValidationError):
    code = "InvalidKernel"


class NotADistribution(ValidationError):
    code = "NotADistribution"


class InvalidDimension(ValidationError):
    code = "InvalidDimension"


class RangeOutOfBounds(ValidationError):
    code = "RangeOutOfBounds"


class DegenerateMask(ValidationError):
    code = "DegenerateMask"


class InvalidLevelCount(ValidationError):
    code = "InvalidLevelCount"


class TimestepOutOfRange(ValidationError):
    code = "TimestepOutOfRange"


class InactiveConfig(ValidationError):
    code = "InactiveConfig"


class ZeroOutwardMass(ValidationError):
    code = "ZeroOutwardMass"


class EmptyQuerySet(ValidationError):
    code = "EmptyQuerySet"


class IndexOutOfRange(ValidationError):
    code = "IndexOutOfRange"


class ConfigInvalid(ValidationError):
    code = "ConfigInvalid"


class IoError(LooseRopeError, OSError):
    code = "IoError"


class FormatError(IoError):
    """A file exists but does not parse as the expected format."""

    code = "FormatError"


class OracleTransportError(LooseRopeError, RuntimeError):
    code = "OracleTransportError"
