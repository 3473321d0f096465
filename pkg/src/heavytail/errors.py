"""Exception hierarchy shared by every module."""


class HeavyTailError(Exception):
    """Base class for all package errors."""


class InfiniteMean(HeavyTailError, ValueError):
    """Model parameters imply a divergent mean."""


class DriftNotNegative(HeavyTailError, ValueError):
    """A negative-drift model was requested but the mean is >= 0."""


class NegativeArgument(HeavyTailError, ValueError):
    pass


class NonpositiveX(HeavyTailError, ValueError):
    pass


class GridTooSmall(HeavyTailError, ValueError):
    pass


class RuleNotIndependent(HeavyTailError, ValueError):
    """The statistic needs a stopping time independent of the increments."""


class DegeneratePHat(HeavyTailError):
    """Estimated P(M = 0) is 0 or 1, so the ladder decomposition is degenerate."""


class PcondViolated(HeavyTailError):
    """P(sigma > h(x)) is not negligible against the increment tail."""


class StateSpaceTooLarge(HeavyTailError, ValueError):
    pass


class ConfigInvalid(HeavyTailError, ValueError):
    """Scenario configuration failed validation.

    ``errors`` maps a dotted field path to a human readable message.
    """

    def __init__(self, errors):
        self.errors = dict(errors)
        msg = "; ".join(f"{k}: {v}" for k, v in self.errors.items())
        super().__init__(msg or "invalid configuration")


class ReportIOError(HeavyTailError, OSError):
    """Report output could not be written."""
