"""Exception types raised by the solvers and the experiment driver."""


class ArgumentError(ValueError):
    """Invalid argument (wrong shape, negative power, bad coefficient vector)."""


class SolverError(RuntimeError):
    """A numerical routine failed to bracket or converge.

    ``bracket`` carries the last multiplier bracket for bisection failures and
    ``best`` the best iterate found for optimizer failures, when available.
    """

    def __init__(self, message, bracket=None, best=None):
        super().__init__(message)
        self.bracket = bracket
        self.best = best


class CapacityError(SolverError):
    """Exhaustive search requested on a model with too many states."""


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""
