"""Exception hierarchy shared by every module of the package."""


class PHQGTError(Exception):
    """Base class for all errors raised by :mod:`phqgt`."""


class DegenerateSpectrum(PHQGTError):
    pass


class ComplexSpectrum(PHQGTError):
    """The operator has left the real-spectrum pseudo-Hermitian regime."""


class ComplexEigenvalues(ComplexSpectrum):
    """Closed-form radicand is negative."""


class NotPseudoHermitian(PHQGTError):
    pass


class ZeroVector(PHQGTError):
    pass


class NonPositiveQ(PHQGTError, ValueError):
    pass


class UnknownDirection(PHQGTError, KeyError):
    pass


class StepTooLarge(PHQGTError):
    pass


class IndexMismatch(PHQGTError):
    pass


class TimeOutOfRange(PHQGTError, ValueError):
    pass


class StepRejected(PHQGTError):
    """Per-step norm growth exceeded the configured threshold."""


class NearOrthogonal(PHQGTError):
    """The overlap in a generalized expectation value is too small to divide by."""


class DimensionMismatch(PHQGTError, ValueError):
    pass


class ConfigError(PHQGTError):
    """Invalid experiment configuration; the message names the offending key."""
