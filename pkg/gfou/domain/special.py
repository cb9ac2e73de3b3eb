"""Gamma and Beta functions and the stationary second moment."""

from scipy import special


def gamma(x: float) -> float:
    """Gamma function."""
    return float(special.gamma(x))


def beta(a: float, b: float) -> float:
    """Beta function B(a, b) = Gamma(a)Gamma(b)/Gamma(a+b)."""
    return float(special.beta(a, b))


def stationary_moment(hurst: float, theta: float = 1.0, scale: float = 1.0) -> float:
    """a = scale * H Gamma(2H) theta^(-2H), the ergodic limit of (1/T) int X^2 dt."""
    return scale * hurst * gamma(2 * hurst) * theta ** (-2 * hurst)
