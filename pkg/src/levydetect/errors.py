"""Exception taxonomy shared across the package."""


class LevyDetectError(Exception):
    """Base class for all package errors."""


class SpecValidationError(LevyDetectError):
    """A process specification or configuration is malformed."""


class UnsupportedPairError(LevyDetectError):
    """The two specifications cannot be paired by this catalogue."""


class InadmissibleModelError(LevyDetectError):
    """An operation requires an admissible change model."""


class AlignmentError(SpecValidationError):
    """A coarse grid is not an integer multiple of the simulation grid."""


class ContractError(LevyDetectError):
    """Detector rule and input type do not match."""


class SupportError(LevyDetectError):
    """A point lies outside the common support of the jump measures."""


class NumericalError(LevyDetectError):
    """A quadrature or estimator failed to converge."""


class DegenerateRuleError(NumericalError):
    """The monitored rule never accumulates mass in the ratio denominator."""


class InfeasibleTargetError(LevyDetectError):
    """The requested false-alarm budget is below one monitoring step."""


class UndefinedEstimateError(LevyDetectError):
    """The change-point estimate is undefined (censored run)."""
