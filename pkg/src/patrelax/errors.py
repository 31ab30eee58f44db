"""Exception types raised across the toolkit."""


class PatError(Exception):
    """Base class for all toolkit errors."""


class InvalidSpecError(PatError, ValueError):
    pass


class InvalidParameterError(PatError, ValueError):
    pass


class GridTooCoarseError(PatError, ValueError):
    pass


class DimensionMismatchError(PatError, ValueError):
    pass


class TooFewSamplesError(PatError, ValueError):
    pass


class InvalidReferenceError(PatError, ValueError):
    pass


class DivergenceError(PatError, ArithmeticError):
    def __init__(self, iteration: int, message: str = ""):
        self.iteration = iteration
        super().__init__(message or f"non-finite values at iteration {iteration}")


class ConfigError(PatError, ValueError):
    """Bad run configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class RtkdError(PatError, ValueError):
    pass


class NotRtkdError(RtkdError):
    pass


class CorruptFileError(RtkdError):
    pass


class UnsupportedDtypeError(RtkdError):
    pass


class StageError(PatError, RuntimeError):
    """A pipeline stage failed; wraps the original exception."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
