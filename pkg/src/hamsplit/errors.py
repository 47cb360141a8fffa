"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


class IntegrationError(RuntimeError):
    """A flow produced non-finite data or failed to converge."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ResonanceError(RuntimeError):
    """A small divisor fell below the configured floor."""

    def __init__(self, message, witness=None, divisor=None):
        super().__init__(message)
        self.witness = witness
        self.divisor = divisor
