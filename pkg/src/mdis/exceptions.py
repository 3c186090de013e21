"""Exception hierarchy for the saliency pipeline."""


class MdisError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MdisError, ValueError):
    """Input data violates a documented precondition."""


class DecodeError(MdisError, OSError):
    """An image or parameter file could not be decoded."""


class ConfigurationError(MdisError):
    """Missing or corrupt configuration, such as a parameter file."""


class FixationParseError(InvalidInputError):
    """A fixation CSV line could not be parsed."""

    def __init__(self, path, line_no, line):
        self.path = path
        self.line_no = line_no
        self.line = line
        super().__init__(f"{path}:{line_no}: cannot parse fixation {line!r}")


class OutOfRangeError(InvalidInputError):
    """A fixation lies outside its coordinate frame."""


class UndefinedMetricError(MdisError, ValueError):
    """A metric is undefined for the given inputs (e.g. a constant map)."""
