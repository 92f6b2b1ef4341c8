"""Exception hierarchy shared by all modules."""


class WardropLogitError(Exception):
    """Base class for every error raised by this package."""


class GraphError(WardropLogitError, ValueError):
    """The multigraph violates a structural invariant."""


class NoRoute(GraphError):
    pass


class RouteExplosion(GraphError):
    pass


class NotSimple(WardropLogitError):
    """Raised when an operation needs a simple (parallel-route) graph."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class GameError(WardropLogitError, ValueError):
    pass


class DimensionMismatch(GameError):
    pass


class NotAdmissible(GameError):
    pass


class NegativeFlow(GameError):
    pass


class NonFinite(WardropLogitError, ValueError):
    pass


class StepRejected(WardropLogitError, ArithmeticError):
    pass


class ContractionViolated(WardropLogitError):
    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


class TooLarge(WardropLogitError):
    pass


class ThroughputMismatch(WardropLogitError, ValueError):
    pass


class ScenarioError(WardropLogitError):
    pass


class ParseError(ScenarioError):
    pass


class ValidationError(ScenarioError, ValueError):
    pass
