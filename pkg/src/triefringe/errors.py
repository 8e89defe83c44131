"""Exception hierarchy.

Errors fall in two families that the CLI maps to distinct exit codes:
configuration/input problems (exit 2) and numeric or resource limits (exit 3).
"""


class TrieFringeError(Exception):
    """Base class for all package errors."""


class ConfigError(TrieFringeError, ValueError):
    """Invalid user input or configuration."""


class NumericError(TrieFringeError, ArithmeticError):
    """A numeric procedure hit a limit or guard."""


# source
class AlphabetTooSmall(ConfigError):
    pass


class NonPositiveProbability(ConfigError):
    pass


class ProbabilitiesDoNotSumToOne(ConfigError):
    pass


# shape
class TriePropertyViolated(ConfigError):
    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class SymbolOutOfRange(ConfigError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ArityMismatch(ParseError):
    pass


class MotifTooSmall(ConfigError):
    pass


class PrefixBudgetExceeded(NumericError):
    def __init__(self, message, replicate=None):
        if replicate is not None:
            message = f"replicate {replicate}: {message}"
        super().__init__(message)
        self.replicate = replicate


# motif / analytics
class OverlappingMotifs(ConfigError):
    def __init__(self, message, pairs=()):
        super().__init__(message)
        self.pairs = list(pairs)


class AllWeightsZero(ConfigError):
    pass


class TooFewStrings(ConfigError):
    pass


class ToleranceUnreachable(NumericError):
    pass


class SeriesDivergenceGuard(NumericError):
    pass


class NotCommensurable(NumericError):
    pass


class PoleAtNonpositiveInteger(NumericError):
    pass


# montecarlo
class DegenerateSample(NumericError):
    pass


class MixedMotifSizes(ConfigError):
    pass


class StateSpaceExceeded(NumericError):
    pass


class ShapeMismatch(ConfigError):
    pass
