"""Exception hierarchy shared by every module."""


class ReachError(Exception):
    """Base class for all errors raised by nfreach."""


class SolverError(ReachError):
    """Raised when a linear program cannot be solved to optimality."""


class InfeasibleError(SolverError):
    pass


class UnboundedError(SolverError):
    pass


class DimensionMismatch(ReachError, ValueError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class EmptyDomain(ReachError, ValueError):
    pass


class LimitOrderViolation(ReachError, ValueError):
    pass


class NoiseOutOfSupport(ReachError, ValueError):
    pass


class DegenerateBounds(ReachError):
    """Lower facet bound above the upper one; indicates an internal bug."""


class MissingControlLimits(ReachError, ValueError):
    pass


class EmptyUnion(ReachError, ValueError):
    pass


class HorizonMismatch(ReachError, ValueError):
    pass


class DegenerateMcHull(ReachError, ValueError):
    pass


class ConfigInvalid(ReachError, ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class UnknownFixture(ReachError, KeyError):
    pass
