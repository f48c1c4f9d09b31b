"""Exception hierarchy shared across the package."""


class NMVMError(Exception):
    """Base class for all package errors."""


class DomainError(NMVMError, ValueError):
    """An argument lies outside the supported domain of a function."""


class ModelValidationError(NMVMError, ValueError):
    """Model parameters violate a structural invariant."""


class MomentNotFinite(NMVMError, ArithmeticError):
    """A requested mixing moment E[Theta^l] does not exist."""


class TailUnderflow(NMVMError, ArithmeticError):
    """A survival probability underflowed, so a hazard cannot be formed."""


class DegenerateAggregate(NMVMError, ValueError):
    """The aggregate has zero Gaussian dispersion (w' Sigma w <= 0)."""


class NonPositiveTCM(NMVMError, ArithmeticError):
    """The tail central moment is not positive, so it cannot be rooted."""


class FactorisationFailure(NMVMError, ArithmeticError):
    """The dispersion matrix admits no real square-root factor."""


class EmptyTail(NMVMError, ValueError):
    """No simulated aggregate exceeds the empirical threshold."""


class InsufficientData(NMVMError, ValueError):
    """Too few observations for the requested statistic."""


class DataError(NMVMError, ValueError):
    """Malformed input file (prices, losses or model)."""


class NonPositivePrice(DataError):
    """A price series contains a zero or negative entry."""


class NumericalWarning(UserWarning):
    """Result computed but with a loss-of-accuracy diagnostic."""
