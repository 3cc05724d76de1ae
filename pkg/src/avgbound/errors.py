"""Exception hierarchy shared by all avgbound modules."""


class AvgBoundError(Exception):
    """Base class for every error raised by avgbound."""


class DimensionError(AvgBoundError, ValueError):
    """Raised for a non-positive or mismatched dimension."""


class PartitionError(AvgBoundError, ValueError):
    """Raised when index blocks overlap, are empty, or do not cover 0..d-1."""


class DomainError(AvgBoundError, ValueError):
    """Raised when a point lies outside the domain of a function."""

    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


class ParameterError(AvgBoundError, ValueError):
    """Raised for inadmissible example parameters.

    ``condition`` names the violated inequality.
    """

    def __init__(self, msg, condition=None):
        super().__init__(msg)
        self.condition = condition


class AveragedBlowupError(AvgBoundError):
    """The averaged solution left the action domain before the horizon.

    ``exit_time`` is the localized exit time; ``partial`` holds the flow
    truncated to the achieved interval.
    """

    def __init__(self, msg, exit_time, partial=None):
        super().__init__(msg)
        self.exit_time = exit_time
        self.partial = partial


class StiffnessError(AvgBoundError):
    """Adaptive step size underflowed; ``partial`` is the trajectory so far."""

    def __init__(self, msg, t_last, partial=None):
        super().__init__(msg)
        self.t_last = t_last
        self.partial = partial


class HypothesisViolation(AvgBoundError):
    """A precondition of the fixed point construction does not hold.

    ``condition`` is one of ``'box_in_domain'``, ``'contraction'``,
    ``'derivative_bound'``, ``'self_map'``.
    """

    def __init__(self, msg, condition):
        super().__init__(msg)
        self.condition = condition


class IterationError(AvgBoundError):
    """Fixed point iteration did not converge within ``max_iter``."""


class ConfigError(AvgBoundError, ValueError):
    """Malformed or invalid run configuration."""
