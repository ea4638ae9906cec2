"""Exception types raised across the package."""


class OptoentError(Exception):
    """Base class for all physics/validation failures in this package."""


class DomainError(OptoentError, ValueError):
    """An input lies outside the domain of the operation."""


class NonPositiveFrequency(OptoentError, ValueError):
    """The optical spring drives the squared mechanical frequency to <= 0."""


class ConditionalInstability(OptoentError, ArithmeticError):
    """The steady-state filter does not exist for these coefficients."""


class ZeroMeasurementRate(OptoentError, ArithmeticError):
    """The analytic steady state is singular because nothing is measured."""


class StepSizeTooLarge(OptoentError, ArithmeticError):
    """The Riccati integrator lost positivity of the covariance."""


class NotHurwitz(OptoentError, ValueError):
    """The drift matrix has an eigenvalue with non-negative real part."""


class NonPhysicalState(OptoentError, ValueError):
    """A covariance matrix violates the uncertainty principle."""


class IllConditionedNoise(OptoentError, ValueError):
    """The joint process/measurement noise intensity is not PSD."""


class NoCrossing(OptoentError, LookupError):
    """A field never crosses the requested level along a column."""


class ConfigError(OptoentError, ValueError):
    """Invalid or unknown configuration entry."""


class DegenerateEllipse(UserWarning):
    """Covariance is (numerically) isotropic, so the squeezing angle is undefined."""
