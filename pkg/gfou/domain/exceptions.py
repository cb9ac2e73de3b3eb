"""Domain exceptions for the gfou toolkit."""


class GfouError(Exception):
    """Base exception for all gfou errors."""

    pass


class InvalidModelError(GfouError):
    """Exception raised when covariance model parameters are out of their domain."""

    pass


class SingularityError(GfouError):
    """Exception raised when a derivative is evaluated on the diagonal or an axis."""

    pass


class AccuracyError(GfouError):
    """Exception raised when adaptive quadrature exhausts its refinement depth."""

    def __init__(self, message: str, estimate: float, error_bound: float) -> None:
        """Initialize the error with the achieved estimate.

        Args:
            message: Human readable description
            estimate: Best value reached before giving up
            error_bound: Error estimate attached to that value
        """
        super().__init__(f"{message} (estimate={estimate:.6g}, error_bound={error_bound:.3g})")
        self.estimate = estimate
        self.error_bound = error_bound


class NonPsdError(GfouError):
    """Exception raised when a Gram matrix cannot be factored even with maximal jitter."""

    pass


class DegenerateInputError(GfouError):
    """Exception raised for degenerate data (zero trajectory, too few samples)."""

    pass


class DomainError(GfouError):
    """Exception raised when a parameter lies outside a theorem's hypothesis range."""

    pass


class GridMismatchError(GfouError):
    """Exception raised when objects built on different grids are combined."""

    pass


class ComplexityError(GfouError):
    """Exception raised when a computation would exceed its configured budget."""

    pass


class ConfigError(GfouError):
    """Exception raised when configuration loading/saving fails."""

    pass


class ExperimentError(GfouError):
    """Exception raised when a Monte Carlo run exceeds its failure cap."""

    pass


class StorageError(GfouError):
    """Exception raised when reading or writing results fails."""

    pass
