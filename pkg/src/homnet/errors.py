"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for usage problems, 3 for data problems, 4 for numeric or constraint
problems.
"""


class HomnetError(Exception):
    exit_code = 1
    code = "ERROR"


class UsageError(HomnetError, ValueError):
    exit_code = 2
    code = "USAGE"


class DataError(HomnetError):
    """Raised when a data file cannot be parsed or a dataset is unusable."""

    exit_code = 3
    code = "DATA"

    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        where = []
        if path is not None:
            where.append(f"file={path}")
        if offset is not None:
            where.append(f"offset={offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class BadMagic(DataError):
    pass


class TruncatedFile(DataError):
    pass


class CountMismatch(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class WrongChannelCount(DataError):
    pass


class WrongDimensions(DataError):
    pass


class EmptyClass(DataError):
    pass


class NumericError(HomnetError, ValueError):
    exit_code = 4
    code = "NUMERIC"


class LengthMismatch(NumericError):
    pass


class ShapeMismatch(NumericError):
    pass


class ConstraintViolation(NumericError):
    pass


class RangeViolation(NumericError):
    pass


class ModeMismatch(NumericError):
    pass


class EmptySet(NumericError):
    pass
