"""Exception hierarchy shared by all belpm modules.

Two broad failure classes matter to callers (and map to CLI exit codes):
bad arguments or configuration, and numeric failures that occur while
computing with valid arguments.
"""


class BelpmError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(BelpmError, ValueError):
    """Invalid argument, shape, count or configuration."""


class UnsupportedKernelError(ArgumentError):
    """Operation requires a parameter-carrying kernel family."""


class NumericError(BelpmError, RuntimeError):
    """A computation failed on otherwise valid inputs."""


class GenerationError(NumericError):
    """Trajectory generation diverged."""


class DegenerateWeightsError(NumericError):
    """All kernel weights collapsed below the numeric floor."""


class UndefinedMetricError(NumericError):
    """Metric denominator vanished (constant target sequence)."""
