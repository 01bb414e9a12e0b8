"""
Errors raised by the simulator. Specification and configuration problems are
``ValidationError`` subclasses so Django forms and ``Model.clean`` can surface
them unchanged.
"""
from django.core.exceptions import ValidationError


class SpecificationError(ValidationError):
    """The network specification is inconsistent."""


class ConfigurationError(ValidationError):
    """An experiment file cannot be read or does not validate."""


class UnknownQueueError(LookupError):
    pass


class UnknownNodeError(LookupError):
    pass


class InfeasibleDecisionError(ValueError):
    """A decision would drive an ebit or demand queue negative."""


class SolverBudgetExhausted(RuntimeError):
    """The branch-and-bound search hit its node budget before proving optimality."""


class SimulationError(RuntimeError):
    """Wraps any failure raised while stepping a simulation."""

    def __init__(self, step, message):
        self.step = step
        super().__init__('step {}: {}'.format(step, message))
