"""Exception hierarchy shared by every module."""


class ToiError(Exception):
    """Base class for all package errors."""


class InvalidRate(ToiError, ValueError):
    pass


class StabilityViolation(ToiError, ValueError):
    """A queue would be (numerically) unstable for the given rates.

    ``constraint`` names the violated inequality, e.g. ``"lambda < mu_t"``.
    """

    def __init__(self, constraint, message=None):
        self.constraint = constraint
        super().__init__(message or f"stability constraint violated: {constraint}")


class NegativeAge(ToiError, ValueError):
    pass


class NonMonotoneTimes(ToiError, ValueError):
    pass


class TooFewTasks(ToiError, ValueError):
    pass


class InvalidProfile(ToiError, ValueError):
    pass


class DegenerateAllocation(ToiError, ValueError):
    pass


class Infeasible(ToiError):
    """No allocation keeps every queue stable.

    ``devices`` lists the indices of the offending devices when known.
    """

    def __init__(self, message, devices=()):
        self.devices = list(devices)
        super().__init__(message)


class NonConvergence(ToiError):
    pass


class ConfigError(ToiError, ValueError):
    pass
