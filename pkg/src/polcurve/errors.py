"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation (ln of a non-positive current, ...)."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class ExcitationError(ValueError):
    """Regressor stream too poorly excited for the requested computation."""


class DivergenceError(ArithmeticError):
    """Estimator state became non-finite or exceeded the divergence guard.

    ``snapshot`` carries the most recent states (newest last) for post-mortem.
    """

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = list(snapshot or [])
