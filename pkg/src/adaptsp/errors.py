"""Exception types shared across the package."""


class AdaptspError(Exception):
    """Base class for package errors."""


class InvalidTree(AdaptspError):
    pass


class UnknownNode(AdaptspError, KeyError):
    pass


class InvalidRange(AdaptspError, ValueError):
    pass


class InvalidConfig(AdaptspError, ValueError):
    pass


class MissingField(AdaptspError, KeyError):
    pass


class MalformedModel(AdaptspError, ValueError):
    pass


class NumericalFailure(AdaptspError):
    pass


class BadBigM(AdaptspError, ValueError):
    pass


class InvalidRevision(AdaptspError, ValueError):
    pass


class InvalidData(AdaptspError, ValueError):
    pass


class SolverFailure(AdaptspError):
    pass


class InvalidPlan(AdaptspError, ValueError):
    pass


class DimensionMismatch(AdaptspError, ValueError):
    pass


class InvalidCosts(AdaptspError, ValueError):
    pass


class UnsupportedDistribution(AdaptspError, ValueError):
    pass
