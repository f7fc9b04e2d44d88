"""Exception types. The CLI maps each family onto an exit code."""


class L96EmuError(Exception):
    exit_code = 1


class ConfigError(L96EmuError):
    exit_code = 2


class DivergenceError(L96EmuError):
    """A time integration or rollout produced non-finite values.

    ``step`` is the 1-based step that failed; ``partial`` holds the finite
    rows produced before it, when the caller has them.
    """

    exit_code = 3

    def __init__(self, message, step=None, partial=None):
        super().__init__(message)
        self.step = step
        self.partial = partial


class NumericalError(L96EmuError):
    """A linear-algebra routine failed (singular system, no convergence)."""

    exit_code = 3


class CapacityError(L96EmuError):
    """Not enough data for the requested operation."""

    exit_code = 4


class DegenerateDataError(L96EmuError):
    """Zero variance or zero norm where a positive one is required."""

    exit_code = 4


class FormatError(L96EmuError):
    """A file on disk does not match the expected binary layout."""

    exit_code = 4
