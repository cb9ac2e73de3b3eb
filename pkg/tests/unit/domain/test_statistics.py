"""Unit tests for sample statistics."""

import numpy as np
import pytest

from gfou.domain.exceptions import DegenerateInputError
from gfou.domain.statistics import (
    jackknife_variance_se,
    ks_distance,
    log_log_fit,
    rate_fit,
    sample_variance,
)


class TestKsDistance:
    """Tests for the Kolmogorov distance to a centered normal."""

    def test_normal_samples_are_close(self) -> None:
        """10000 N(0, 1) draws stay well inside the 1% critical value."""
        samples = np.random.default_rng(1).standard_normal(10_000)
        assert ks_distance(samples, 1.0) < 0.02

    def test_wrong_scale_is_far(self) -> None:
        """N(0, 4) draws against N(0, 1) are visibly off."""
        samples = 2.0 * np.random.default_rng(1).standard_normal(2000)
        assert ks_distance(samples, 1.0) > 0.1

    def test_bounded(self) -> None:
        """A far-off sample has distance at most 1."""
        assert ks_distance(np.full(50, 100.0), 1.0) == pytest.approx(1.0)

    def test_too_few_samples(self) -> None:
        """At least 20 samples are required."""
        with pytest.raises(DegenerateInputError, match=">= 20"):
            ks_distance(np.zeros(19), 1.0)

    def test_invalid_scale(self) -> None:
        """The target scale must be positive."""
        with pytest.raises(ValueError, match="Invalid target_sd"):
            ks_distance(np.zeros(30), 0.0)


class TestLogLogFit:
    """Tests for rate fits."""

    def test_power_law(self) -> None:
        """y = 3 T^(-1/2) has slope -1/2 and a perfect fit."""
        T = [10.0, 20.0, 40.0, 80.0]
        fit = rate_fit(T, [3 * t**-0.5 for t in T])
        assert fit.slope == pytest.approx(-0.5)
        assert fit.r2 == pytest.approx(1.0)

    def test_flat(self) -> None:
        """Constant y gives slope 0 with r2 = 1."""
        fit = log_log_fit([1.0, 2.0, 4.0], [0.5, 0.5, 0.5])
        assert fit.slope == 0.0
        assert fit.r2 == 1.0

    @pytest.mark.parametrize(
        ("x", "y"),
        [
            ([1.0, 2.0], [1.0, 2.0]),
            ([1.0, 2.0, 4.0], [1.0, 0.0, 2.0]),
            ([1.0, 2.0, 4.0], [1.0, np.inf, 2.0]),
            ([2.0, 2.0, 2.0], [1.0, 2.0, 3.0]),
        ],
    )
    def test_degenerate(self, x: list[float], y: list[float]) -> None:
        """Too few points, non-positive values or no spread in x."""
        with pytest.raises(DegenerateInputError):
            log_log_fit(x, y)

    def test_length_mismatch(self) -> None:
        """x and y must pair up."""
        with pytest.raises(ValueError, match="Length mismatch"):
            log_log_fit([1.0, 2.0, 3.0], [1.0, 2.0])


class TestVariance:
    """Tests for variance and its standard error."""

    def test_sample_variance(self) -> None:
        """Unbiased, and zero for one sample."""
        assert sample_variance(np.array([1.0, 3.0])) == pytest.approx(2.0)
        assert sample_variance(np.array([5.0])) == 0.0

    def test_jackknife_normal(self) -> None:
        """SE of the variance of N(0, 1) samples is about sqrt(2 / n)."""
        samples = np.random.default_rng(3).standard_normal(4000)
        assert jackknife_variance_se(samples) == pytest.approx(np.sqrt(2 / 4000), rel=0.15)

    def test_jackknife_matches_leave_one_out(self) -> None:
        """The closed form equals the explicit leave-one-out computation."""
        x = np.random.default_rng(4).normal(size=25)
        loo = np.array([np.var(np.delete(x, i), ddof=1) for i in range(x.size)])
        explicit = np.sqrt((x.size - 1) / x.size * np.sum((loo - loo.mean()) ** 2))
        assert jackknife_variance_se(x) == pytest.approx(explicit, rel=1e-10)

    def test_jackknife_small(self) -> None:
        """Fewer than three samples give zero."""
        assert jackknife_variance_se(np.array([1.0, 2.0])) == 0.0
