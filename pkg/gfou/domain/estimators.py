"""Drift estimators and their asymptotic constants.

The moment estimator inverts the ergodic limit of (1/T) int X^2 dt. The least squares
estimator is -int X dX / int X^2 dt, either with plain forward sums or with the
forward sums corrected toward the Skorohod integral.
"""

import logging
import math
from collections.abc import Iterable

import numpy as np
from scipy import integrate

from gfou.domain.entities import (
    ESTIMATORS,
    AsymptoticConstants,
    EstimateRecord,
    IncrementGram,
    Trajectory,
)
from gfou.domain.exceptions import DegenerateInputError, DomainError, GridMismatchError
from gfou.domain.special import gamma

logger = logging.getLogger(__name__)

QUARTER_TOLERANCE = 1e-9
QUARTER_LIMIT_BAND = 1e-6  # |4H - 1| below this uses the limit value 2/pi


def time_average_square(trajectory: Trajectory) -> float:
    """(1/T) int_0^T X^2 dt by the trapezoidal rule."""
    return float(integrate.trapezoid(trajectory.X**2, dx=trajectory.grid.dt)) / trajectory.grid.T


def _forward_sum(trajectory: Trajectory) -> float:
    x = trajectory.X
    return float(np.dot(x[:-1], np.diff(x)))


def _check_hurst(H: float) -> None:
    if not 0 < H < 1:
        raise ValueError(f"Invalid H: {H}")


def me_from_moment(int_x2: float, H: float, scale: float = 1.0) -> float:
    """theta_tilde = (int_x2 / (scale H Gamma(2H)))^(-1/(2H))."""
    _check_hurst(H)
    if not int_x2 > 0:
        raise DegenerateInputError(f"Moment estimator needs (1/T) int X^2 dt > 0, got {int_x2}")
    return (int_x2 / (scale * H * gamma(2 * H))) ** (-1.0 / (2 * H))


def estimate_me(trajectory: Trajectory, H: float) -> float:
    """Moment estimator from a trajectory.

    Args:
        trajectory: Observed path
        H: Hurst exponent of the noise

    Returns:
        float: theta_tilde

    Raises:
        DegenerateInputError: If the trajectory is identically zero
    """
    return me_from_moment(time_average_square(trajectory), H, trajectory.noise_scale)


def estimate_lse_naive(trajectory: Trajectory) -> float:
    """-sum X_i (X_(i+1) - X_i) / int X^2 dt with left-point sums.

    Biased for H < 1/2, where the forward sums do not approximate the Skorohod integral.
    """
    denominator = time_average_square(trajectory) * trajectory.grid.T
    if not denominator > 0:
        raise DegenerateInputError("Least squares estimator needs int X^2 dt > 0")
    return -_forward_sum(trajectory) / denominator


def skorohod_correction(gram: IncrementGram, theta: float) -> float:
    """c_T = sum_i sum_(j<i) exp(-theta (t_i - t_j*)) C_ji, the mean of the forward sums."""
    n = gram.grid.n
    lag = np.arange(1, n, dtype=np.float64)
    weights = np.exp(-theta * gram.grid.dt * (lag - 0.5))
    return float(np.dot(weights, gram.superdiagonal_sums))


def estimate_lse_skorohod(trajectory: Trajectory, gram: IncrementGram, H: float) -> float:
    """Two-stage corrected least squares estimator.

    The moment estimator gives a pilot theta_0, then the expected forward sum
    sigma^2 c_T(theta_0) is removed from the numerator.

    Raises:
        GridMismatchError: If gram and trajectory live on different grids
        DegenerateInputError: If the pilot or the denominator degenerates
    """
    if gram.grid != trajectory.grid:
        raise GridMismatchError(f"Gram grid {gram.grid} != trajectory grid {trajectory.grid}")
    denominator = time_average_square(trajectory) * trajectory.grid.T
    if not denominator > 0:
        raise DegenerateInputError("Least squares estimator needs int X^2 dt > 0")
    if trajectory.sigma == 0:
        return -_forward_sum(trajectory) / denominator
    pilot = estimate_me(trajectory, H)
    correction = trajectory.sigma**2 * skorohod_correction(gram, pilot)
    return -(_forward_sum(trajectory) - correction) / denominator


def estimate_all(
    trajectory: Trajectory,
    gram: IncrementGram | None,
    H: float,
    theta_true: float | None = None,
    estimators: Iterable[str] = ESTIMATORS,
) -> EstimateRecord:
    """Run the requested estimators and pack the result in an EstimateRecord.

    Estimators that are not requested are reported as NaN.
    """
    wanted = set(estimators)
    unknown = wanted - set(ESTIMATORS)
    if unknown:
        raise ValueError(f"Unknown estimators: {sorted(unknown)}")
    int_x2 = time_average_square(trajectory)
    if not int_x2 > 0:
        raise DegenerateInputError("Trajectory is identically zero")

    theta_tilde = math.nan
    if "me" in wanted or "lse_skorohod" in wanted:
        theta_tilde = me_from_moment(int_x2, H, trajectory.noise_scale)
    naive = estimate_lse_naive(trajectory) if "lse_naive" in wanted else math.nan
    skorohod = math.nan
    if "lse_skorohod" in wanted:
        if gram is None:
            raise ValueError("lse_skorohod needs the increment gram")
        skorohod = estimate_lse_skorohod(trajectory, gram, H)
    if "me" not in wanted:
        theta_tilde = math.nan

    return EstimateRecord(
        seed=trajectory.seed,
        T=trajectory.grid.T,
        n=trajectory.grid.n,
        H=H,
        theta_true=trajectory.theta if theta_true is None else theta_true,
        theta_tilde=theta_tilde,
        theta_hat_naive=naive,
        theta_hat_skorohod=skorohod,
        int_x2=int_x2,
        model=trajectory.model.descriptor,
    )


def sigma_h2(H: float) -> float:
    """(4H - 1) + 2 Gamma(2 - 4H) Gamma(4H) / (Gamma(2H) Gamma(1 - 2H)) for H in (0, 1/2)."""
    if not 0 < H < 0.5:
        raise DomainError(f"sigma_H^2 is defined for H in (0, 1/2), got {H}")
    if abs(4 * H - 1) < QUARTER_LIMIT_BAND:
        return 2 / math.pi
    return (4 * H - 1) + 2 * gamma(2 - 4 * H) * gamma(4 * H) / (gamma(2 * H) * gamma(1 - 2 * H))


def berry_esseen_delta(H: float) -> float:
    """1/2 on (0, 1/4], 3/2 - 4H on (1/4, 3/8).

    At H = 1/4 the rate carries an extra log T factor.
    """
    if not 0 < H < 0.375:
        raise DomainError(f"The Berry-Esseen rate needs H in (0, 3/8), got {H}")
    if H <= 0.25 + QUARTER_TOLERANCE:
        return 0.5
    return 1.5 - 4 * H


def asymptotic_constants(theta: float, H: float) -> AsymptoticConstants:
    """sigma_H^2, the limiting variances of both estimators, and delta(H).

    Raises:
        DomainError: If H is outside (0, 1/2), where the normal limit holds
    """
    if not theta > 0:
        raise ValueError(f"Invalid theta: {theta}")
    s2 = sigma_h2(H)
    lse_var = theta * s2
    return AsymptoticConstants(
        theta=theta,
        H=H,
        sigma_H2=s2,
        lse_var=lse_var,
        me_var=lse_var / (4 * H**2),
        delta=berry_esseen_delta(H) if H < 0.375 else None,
        h_quarter_flag=abs(H - 0.25) < QUARTER_TOLERANCE,
    )
