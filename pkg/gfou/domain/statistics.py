"""Sample statistics for the Monte Carlo harness."""

import math
from collections.abc import Sequence

import numpy as np
from scipy import stats

from gfou.domain.entities import FloatArray, RateFit
from gfou.domain.exceptions import DegenerateInputError

MIN_KS_SAMPLES = 20
MIN_FIT_POINTS = 3


def ks_distance(samples: Sequence[float] | FloatArray, target_sd: float) -> float:
    """One-sample Kolmogorov distance to N(0, target_sd^2).

    max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n) over the sorted sample.

    Raises:
        DegenerateInputError: With fewer than MIN_KS_SAMPLES samples
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n < MIN_KS_SAMPLES:
        raise DegenerateInputError(f"KS distance needs >= {MIN_KS_SAMPLES} samples, got {n}")
    if not target_sd > 0:
        raise ValueError(f"Invalid target_sd: {target_sd}")
    cdf = stats.norm.cdf(x, scale=target_sd)
    i = np.arange(1, n + 1, dtype=np.float64)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1) / n)
    return float(min(1.0, max(d_plus, d_minus, 0.0)))


def log_log_fit(x: Sequence[float], y: Sequence[float]) -> RateFit:
    """Least-squares slope of log y against log x, with R^2.

    Raises:
        DegenerateInputError: With fewer than three points, non-positive values,
            or no spread in x
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.size != ya.size:
        raise ValueError(f"Length mismatch: {xa.size} != {ya.size}")
    if xa.size < MIN_FIT_POINTS:
        raise DegenerateInputError(f"Rate fit needs >= {MIN_FIT_POINTS} points, got {xa.size}")
    if np.any(xa <= 0) or np.any(ya <= 0) or not np.all(np.isfinite(ya)):
        raise DegenerateInputError("Rate fit needs positive finite values")
    lx, ly = np.log(xa), np.log(ya)
    if np.ptp(lx) == 0:
        raise DegenerateInputError("Rate fit needs at least two distinct abscissae")
    if np.ptp(ly) == 0:
        return RateFit(slope=0.0, r2=1.0)
    fit = stats.linregress(lx, ly)
    return RateFit(slope=float(fit.slope), r2=float(fit.rvalue**2))


def rate_fit(T_list: Sequence[float], ks_list: Sequence[float]) -> RateFit:
    """Slope of log KS against log T; the empirical counterpart of C / T^delta."""
    return log_log_fit(T_list, ks_list)


def sample_variance(x: FloatArray) -> float:
    """Unbiased variance, 0 for a single sample."""
    return float(np.var(x, ddof=1)) if x.size > 1 else 0.0


def jackknife_variance_se(x: FloatArray) -> float:
    """Jackknife standard error of the unbiased sample variance."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 3:
        return 0.0
    centered = x - np.mean(x)
    s1 = np.sum(centered)
    s2 = np.sum(centered**2)
    loo = (s2 - centered**2 - (s1 - centered) ** 2 / (n - 1)) / (n - 2)
    return float(math.sqrt((n - 1) / n * np.sum((loo - np.mean(loo)) ** 2)))
