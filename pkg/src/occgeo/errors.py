"""Exception hierarchy.

Everything raised for bad input data derives from :class:`DataError`, which
the CLI maps to exit code 2.
"""


class DataError(ValueError):
    """Input data violates a format or type invariant."""


class MalformedHeader(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class Truncated(DataError):
    pass


class BadMagic(DataError):
    pass


class NonBinaryMask(DataError):
    pass


class MissingField(DataError):
    pass


class DegenerateIntrinsics(DataError):
    pass


class NotARotation(DataError):
    pass


class DimensionMismatch(DataError):
    pass
