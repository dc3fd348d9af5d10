"""Exception types shared across the package."""


class MethfidError(Exception):
    """Base class for all package errors."""


class DimensionError(MethfidError, ValueError):
    """Strand lengths and rate vectors disagree on the number of sites."""


class DataError(MethfidError, ValueError):
    """Malformed dataset input. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DegenerateRateError(MethfidError, ValueError):
    """The rates describe an absorbing process with no defined stationary density."""


class InvalidParameterError(MethfidError, ValueError):
    """A parameter lies outside its permitted range."""


class ConfigError(MethfidError, ValueError):
    """Bad run configuration. ``problems`` lists every issue found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class EnumerationTooLarge(MethfidError, ValueError):
    """Brute-force enumeration requested for too many sites."""


class NumericalFailure(MethfidError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable result."""
