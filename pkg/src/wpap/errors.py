"""Exception hierarchy.

Every error names the operation that raised it so that failures surfacing
through the command line can be traced back to a module operation and the
precondition that was violated.
"""


class WpapError(Exception):
    """Base class; ``operation`` is the failing operation's name."""

    def __init__(self, operation, message):
        self.operation = operation
        self.message = message
        super().__init__(f"{operation}: {message}")


class PreconditionError(WpapError, ValueError):
    """Input rejected because an operation precondition does not hold."""


class ConvergenceError(WpapError, RuntimeError):
    """Iteration failed to converge (max iterations or divergence)."""


class ConfigError(WpapError, ValueError):
    """Configuration file failed validation.

    ``violations`` lists every problem found, not just the first one.
    """

    def __init__(self, violations, operation="parse_config"):
        self.violations = list(violations)
        super().__init__(operation, "; ".join(self.violations))
