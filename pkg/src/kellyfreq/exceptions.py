"""Exception types shared across the package.

Two families matter for callers: ``DataError`` (the input data is unusable)
and ``ConfigError`` (the requested parameters make no sense for the data).
The command line maps them to exit codes 1 and 2 respectively. Both derive
from ``ValueError`` so generic numeric code can catch them the usual way.
"""


class KellyFreqError(Exception):
    """Base class for all package errors."""


class DataError(KellyFreqError, ValueError):
    """Invalid or unusable input data."""


class ConfigError(KellyFreqError, ValueError):
    """Invalid parameter value or parameter/data combination."""


# -- data errors --------------------------------------------------------

class SeriesTooShort(DataError):
    """Price series has fewer than two observations."""


class NonPositivePrice(DataError):
    """Price series contains a zero or negative price."""


class NoCommonTimestamps(DataError):
    """Series share fewer than two timestamps, no panel can be built."""


class DuplicateSymbol(DataError):
    """Two input series carry the same symbol."""


class MalformedRow(DataError):
    """A CSV row could not be parsed. The message carries the line number."""


class EmptyPanel(DataError):
    """Operation requires at least one block of returns."""


class NonPositiveGross(DataError):
    """A gross return factor is zero or negative where positivity is required."""


class NonPositiveValue(DataError):
    """An account trajectory contains a zero or negative value."""


class DomainViolation(DataError):
    """A weight vector leaves the log domain (some 1 + K'x <= 0)."""


# -- config errors ------------------------------------------------------

class PeriodExceedsData(ConfigError):
    """Rebalancing period n is larger than the available history."""


class WindowExceedsData(ConfigError):
    """Estimation window needs more blocks than the panel provides."""


class CostLengthMismatch(ConfigError):
    """Cost vector length does not match the number of assets."""


class DimensionMismatch(ConfigError):
    """Vector or matrix dimensions are inconsistent."""


class ZeroCost(ConfigError):
    """Operation requires strictly positive transaction costs."""


class InputNotOptimal(ConfigError):
    """A weight claimed to be optimal fails its optimality certificate."""


class LatticeTooLarge(ConfigError):
    """Requested grid resolution would enumerate too many lattice points."""
