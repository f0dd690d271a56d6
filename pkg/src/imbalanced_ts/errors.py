"""Exception types raised across the package."""


class ImbalancedTSError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ImbalancedTSError, ValueError):
    pass


class EmptyData(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class EmptySplit(DataError):
    pass


class EmptyTrainSplit(EmptySplit):
    pass


class EmptyEvalSplit(EmptySplit):
    pass


class UnknownChannel(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class IndexOutOfRange(ImbalancedTSError, IndexError):
    pass


class OutOfSupport(ImbalancedTSError, ValueError):
    """A value lies outside the support of a histogram."""


class ZeroInclusionWeights(ImbalancedTSError, ValueError):
    """Every candidate index has zero inclusion weight, nothing can be drawn."""


class SingularDesign(ImbalancedTSError, ValueError):
    pass


class ShapeMismatch(ImbalancedTSError, ValueError):
    pass


class ConfigError(ImbalancedTSError, ValueError):
    """Invalid configuration; ``field`` names the offending config key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
