"""Exception taxonomy shared across the package."""


class ContractViolation(ValueError):
    """An argument broke a documented precondition (shape, finiteness, range)."""


class SingularMatrixError(ArithmeticError):
    """A matrix that must be positive definite was numerically singular."""


class SimulationDivergence(RuntimeError):
    """A simulated trajectory left the trusted numeric range."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, message, keys=()):
        super().__init__(message)
        self.keys = tuple(keys)


class MissingArtifact(RuntimeError):
    """A pipeline stage needs an output that an earlier stage never produced."""
