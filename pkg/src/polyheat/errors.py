"""Exception taxonomy for the weighted heat-kernel laboratory.

Every failure mode that a caller might want to catch (or that the CLI maps
to a distinct exit code) gets its own class.  The ``exit_code`` attribute is
what the command-line driver returns when the exception escapes; code 1 is
reserved for verification failures and 2 for configuration problems, so
domain errors start at 3.
"""

__all__ = [
    "PolyheatError",
    "NotRealError",
    "HarmonicError",
    "DegreeTooLowError",
    "AllMixedTermsVanishError",
    "GridTooCoarseError",
    "NotHermitianError",
    "NotPSDError",
    "SolverDivergedError",
    "ScheduleUnreachableError",
    "ScheduleTooShortError",
    "TailNotNegligibleError",
    "PositiveRealPartError",
    "OrderTooHighError",
    "CylinderOutOfRangeError",
    "ConfigParseError",
    "ConfigValidationError",
]


class PolyheatError(Exception):
    """Base class for all package-specific errors."""

    exit_code = 9


class ConfigParseError(PolyheatError):
    """Config file could not be tokenized; message lists every bad line."""

    exit_code = 2


class ConfigValidationError(PolyheatError):
    """Config parsed but one or more values are out of range / inconsistent."""

    exit_code = 2


class ScheduleUnreachableError(PolyheatError):
    """Snapshot schedule cannot be honored (non-ascending, before burn-in,
    or incompatible with the requested time step)."""

    exit_code = 3


class SolverDivergedError(PolyheatError):
    """Inner linear solver failed to reach its residual target."""

    exit_code = 4


class GridTooCoarseError(PolyheatError):
    """Grid resolution insufficient for the requested geometric computation."""

    exit_code = 5


class TailNotNegligibleError(PolyheatError):
    """Time integral truncated before the integrand decayed (tail estimate
    exceeds the tolerance relative to the near-diagonal value)."""

    exit_code = 6


class NotHermitianError(PolyheatError):
    """Assembled operator failed its self-adjointness check."""

    exit_code = 7


class NotPSDError(PolyheatError):
    """Assembled operator failed its positive-semidefiniteness check."""

    exit_code = 7


class NotRealError(PolyheatError):
    """Coefficient table is not conjugate-symmetric within tolerance."""

    exit_code = 8


class HarmonicError(PolyheatError):
    """Polynomial has no mixed term: the weight would be trivial."""

    exit_code = 8


class DegreeTooLowError(PolyheatError):
    """Polynomial degree below 2."""

    exit_code = 8


class AllMixedTermsVanishError(PolyheatError):
    """All mixed Taylor coefficients vanish at the requested center."""

    exit_code = 8


class ScheduleTooShortError(PolyheatError):
    """Snapshot schedule does not reach far enough in time for the check."""

    exit_code = 8


class PositiveRealPartError(PolyheatError):
    """Stochastic phase acquired a positive real part (must be <= 0)."""

    exit_code = 8


class OrderTooHighError(PolyheatError):
    """Requested derivative order outside the supported range."""

    exit_code = 8


class CylinderOutOfRangeError(PolyheatError):
    """Space-time cylinder not contained in the computed data."""

    exit_code = 8
