class LrpError(ValueError):
    """Base class for domain errors raised by the pricing and simulation services."""


class InfeasibleError(LrpError):
    pass


class UnboundedError(LrpError):
    pass


class ConvergenceError(LrpError):
    """An iterative solver hit its iteration cap."""


class TopologyError(LrpError):
    pass


class ScenarioError(LrpError):
    """Wraps a module error with the day/customer it happened on."""
