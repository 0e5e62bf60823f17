"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigurationError -> 2,
DataError (and subclasses) -> 3, PartialFailure -> 4.
"""


class ConfigurationError(ValueError):
    """A parameter or option is outside its contract."""


class DataError(ValueError):
    """Input data violates an invariant (bad values, misalignment)."""


class ParseError(DataError):
    """A file could not be parsed; message names the offending row."""


class PartialFailure(RuntimeError):
    """A batch run finished but some items failed."""
