"""Exception types shared across the package."""


class KmseError(Exception):
    """Base class for all package errors."""


class InputError(KmseError):
    """Invalid argument or malformed input data."""


class ConfigurationError(KmseError):
    """Estimator or filter configuration incompatible with the problem,
    e.g. a Landweber step size exceeding the spectrum bound."""


class DefinitenessError(KmseError):
    """A solve required a positive definite matrix and hit a non-positive pivot."""


class ConvergenceError(KmseError):
    """An iterative routine failed to converge or diverged."""


class DegenerateBandwidthError(InputError):
    """The median heuristic produced a zero bandwidth."""


class CsvParseError(InputError):
    """CSV input could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ReplicationError(KmseError):
    """A Monte-Carlo replication failed; carries the replication index."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"replication {index} failed: {cause}")
        self.index = index
