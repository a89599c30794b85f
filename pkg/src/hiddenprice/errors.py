"""Exception types shared across the package."""


class HiddenPriceError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(HiddenPriceError, ValueError):
    """An argument lies outside the domain of the operation."""


class BracketError(HiddenPriceError, ValueError):
    """A root-finding bracket does not straddle the target value."""


class DivergentStatistic(HiddenPriceError):
    """A pricing statistic is infinite on part of the searched family."""


class DivergentMean(DivergentStatistic):
    """The mean of a distribution is infinite."""


class DivergentPayment(HiddenPriceError):
    """The expected payment of a mechanism is infinite."""


class TangentUndefined(HiddenPriceError):
    """No finite tangent line exists at the requested point."""


class PropernessError(HiddenPriceError):
    """A numerically minimized report disagrees with the statistic it should elicit."""
