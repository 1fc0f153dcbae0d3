"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A numeric argument is outside its allowed domain."""


class GraphFormatError(ValueError):
    """An edge-list file is malformed."""


class ResourceError(ValueError):
    """A request would need an infeasible amount of memory or time."""


class OrderViolationError(ValueError):
    """Two states were expected to be ordered componentwise but are not."""


class MetricContractError(TypeError):
    """A path metric was used somewhere that requires a registered increasing metric."""


class SpectralConvergenceError(RuntimeError):
    """Power iteration did not settle within the iteration budget."""

    def __init__(self, message, estimate, vector):
        super().__init__(message)
        self.estimate = estimate
        self.vector = vector
