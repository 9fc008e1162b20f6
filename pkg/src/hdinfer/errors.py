"""Exception types raised across the package."""


class HDInferError(Exception):
    """Base class for all package errors."""


class ZeroColumn(HDInferError, ValueError):
    def __init__(self, column: int):
        super().__init__(f"column {column} is identically zero")
        self.column = column


class LengthMismatch(HDInferError, ValueError):
    pass


class NonFinite(HDInferError, FloatingPointError):
    pass


class DegenerateResponse(HDInferError, ValueError):
    pass


class DegenerateDirection(HDInferError, ArithmeticError):
    """The nodewise residual is (nearly) orthogonal to its column."""


class SaturatedFit(HDInferError, ValueError):
    pass


class InvalidAlpha(HDInferError, ValueError):
    pass


class EmptyDraws(HDInferError, ValueError):
    pass


class TooManyRefitFailures(HDInferError, RuntimeError):
    pass


class ZeroSigma(HDInferError, ValueError):
    pass


class SingularSupportGram(HDInferError, ArithmeticError):
    pass


class SingularCovariance(HDInferError, ArithmeticError):
    pass


class AllReplicationsFailed(HDInferError, RuntimeError):
    pass


class ReplicationFailureCeiling(HDInferError, RuntimeError):
    pass


class ConfigError(HDInferError, ValueError):
    pass


class NotConvergedWarning(RuntimeWarning):
    """Coordinate descent stopped before reaching the KKT tolerance."""
