"""Exception and warning types shared across the toolkit."""


class RcpumError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(RcpumError):
    """Malformed model, distribution, scheme, or scenario configuration."""


class InfeasibleScenarioError(RcpumError):
    """Every bundle in a scenario is excluded, so the argmax is empty."""


class EvaluationError(RcpumError):
    """A demand evaluation returned a non-finite value."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class PermutationConditionError(RcpumError):
    """Two derivative entries do not share the same good-index multiset."""


class RelevanceError(RcpumError):
    """No derivative entry above the relevance threshold for a good tuple.

    ``good_tuple`` names the offending tuple and ``order`` the moment order
    at which recovery stopped.
    """

    def __init__(self, message, good_tuple=None, order=None):
        super().__init__(message)
        self.good_tuple = good_tuple
        self.order = order


class AnchorError(RcpumError):
    """The inductive anchor moment vanished at some order."""

    def __init__(self, message, order=None):
        super().__init__(message)
        self.order = order


class WeightingError(RcpumError):
    """A welfare weighting scheme is undefined on the given support."""


class PreconditionError(RcpumError):
    """An operation's mathematical precondition does not hold."""


class ExtrapolationWarning(UserWarning):
    """A Taylor evaluation was requested outside the trust radius."""
