"""Unit tests for the covariance families."""

import math
from collections.abc import Callable

import numpy as np
import pytest

from gfou.domain.covariance import (
    CovarianceModel,
    Family,
    check_hypothesis,
    cov,
    d2cov_dtds,
    dcov_dt,
    finite_difference_d2cov,
    increment_covariance,
    remainder,
)
from gfou.domain.entities import GridSpec
from gfou.domain.exceptions import InvalidModelError, SingularityError

ALL_MODELS = [
    CovarianceModel.fbm(0.3),
    CovarianceModel.subfbm(0.3),
    CovarianceModel.bifbm(0.6, 0.5),
    CovarianceModel.gensubfbm(0.2, 1.5),
    CovarianceModel.mixture(
        [(0.5, CovarianceModel.fbm(0.3)), (2.0, CovarianceModel.subfbm(0.3))]
    ),
]


@pytest.fixture(params=ALL_MODELS, ids=lambda m: m.descriptor)
def model(request: pytest.FixtureRequest) -> CovarianceModel:
    """Every built-in family, one parameter point each."""
    result: CovarianceModel = request.param
    return result


class TestClosedForms:
    """Tests for R and its derivatives."""

    def test_fbm_unit_variance(self) -> None:
        """R(1,1) = 1 for any H."""
        assert cov(CovarianceModel.fbm(0.5), 1.0, 1.0) == pytest.approx(1.0)
        assert cov(CovarianceModel.fbm(0.2), 1.0, 1.0) == pytest.approx(1.0)

    def test_fbm_value(self) -> None:
        """FBM(0.3) at (1, 2) is 2^0.6 / 2."""
        assert cov(CovarianceModel.fbm(0.3), 1.0, 2.0) == pytest.approx(2**0.6 / 2, rel=1e-14)

    def test_zero_boundary(self, model: CovarianceModel) -> None:
        """R(0, s) vanishes."""
        s = np.linspace(0.0, 5.0, 11)
        assert np.all(np.abs(model.cov(0.0, s)) <= 1e-12)

    def test_symmetry(self, model: CovarianceModel) -> None:
        """R(t, s) = R(s, t) exactly."""
        t = np.linspace(0.1, 3.0, 15)
        r = model.cov(t[:, None], t[None, :])
        assert np.array_equal(r, r.T)

    def test_subfbm_variance(self) -> None:
        """Var of sub-fBm at t is (2 - 2^(2H-1)) t^(2H)."""
        h = 0.3
        expected = (2 - 2 ** (2 * h - 1)) * 3.0 ** (2 * h)
        assert cov(CovarianceModel.subfbm(h), 3.0, 3.0) == pytest.approx(expected)

    def test_bifbm_variance(self) -> None:
        """Var of bi-fBm at t is t^(2HK)."""
        assert cov(CovarianceModel.bifbm(0.6, 0.5), 2.0, 2.0) == pytest.approx(2.0**0.6)

    def test_sigma_scales_quadratically(self) -> None:
        """sigma enters as sigma^2 R."""
        base = cov(CovarianceModel.subfbm(0.3), 1.5, 0.5)
        scaled = cov(CovarianceModel.subfbm(0.3, sigma=3.0), 1.5, 0.5)
        assert scaled == pytest.approx(9.0 * float(base))

    def test_mixture_weights_enter_squared(self) -> None:
        """R_mix = sum w^2 R_i."""
        fbm, sub = CovarianceModel.fbm(0.3), CovarianceModel.subfbm(0.3)
        mixture = CovarianceModel.mixture([(0.5, fbm), (2.0, sub)])
        expected = 0.25 * float(cov(fbm, 1.2, 0.7)) + 4.0 * float(cov(sub, 1.2, 0.7))
        assert cov(mixture, 1.2, 0.7) == pytest.approx(expected)

    def test_fbm_first_derivative(self) -> None:
        """dR/dt at (2, 1) is H (2^(2H-1) - 1)."""
        assert dcov_dt(CovarianceModel.fbm(0.3), 2.0, 1.0) == pytest.approx(0.3 * (2**-0.4 - 1))

    def test_first_derivative_matches_difference(self, model: CovarianceModel) -> None:
        """dR/dt agrees with a central difference off the diagonal."""
        t, s, h = 1.7, 0.6, 1e-6
        numeric = (float(cov(model, t + h, s)) - float(cov(model, t - h, s))) / (2 * h)
        assert dcov_dt(model, t, s) == pytest.approx(numeric, rel=1e-6)

    @pytest.mark.parametrize(("t", "s"), [(1.3, 0.7), (0.2, 2.5), (4.0, 3.5)])
    def test_mixed_derivative_matches_difference(
        self, model: CovarianceModel, t: float, s: float
    ) -> None:
        """Closed-form d2R/dtds agrees with finite differences."""
        assert d2cov_dtds(model, t, s) == pytest.approx(
            finite_difference_d2cov(model, t, s), rel=1e-4
        )

    def test_principal_plus_remainder(self, model: CovarianceModel) -> None:
        """d2R/dtds = principal part + Psi."""
        t = np.array([0.3, 1.0, 2.5])
        s = np.array([1.1, 0.4, 4.0])
        np.testing.assert_allclose(
            model.d2cov_dtds(t, s), model.principal(t, s) + model.remainder(t, s), rtol=1e-12
        )

    def test_fbm_remainder_vanishes(self) -> None:
        """fBm is its own principal part."""
        assert remainder(CovarianceModel.fbm(0.3), 2.0, 0.5) == 0.0

    def test_subfbm_remainder(self) -> None:
        """Psi = -H(2H-1)(t+s)^(2H-2) for sub-fBm."""
        h, t, s = 0.3, 1.0, 2.0
        expected = -h * (2 * h - 1) * (t + s) ** (2 * h - 2)
        assert remainder(CovarianceModel.subfbm(h), t, s) == pytest.approx(expected)

    def test_diagonal_is_refused(self, model: CovarianceModel) -> None:
        """Derivatives refuse the diagonal and the axes."""
        with pytest.raises(SingularityError):
            model.d2cov_dtds(1.0, 1.0)
        with pytest.raises(SingularityError):
            model.d2cov_dtds(0.0, 1.0)
        with pytest.raises(SingularityError):
            model.dcov_dt(2.0, 2.0)


class TestModelValidation:
    """Tests for parameter domains and JSON descriptions."""

    @pytest.mark.parametrize(
        "build",
        [
            lambda: CovarianceModel.fbm(1.0),
            lambda: CovarianceModel.subfbm(0.0),
            lambda: CovarianceModel.bifbm(0.5, 1.0),
            lambda: CovarianceModel.gensubfbm(0.3, 0.5),
            lambda: CovarianceModel.gensubfbm(0.6, 1.8),
            lambda: CovarianceModel.fbm(0.3, sigma=0.0),
            lambda: CovarianceModel.mixture([]),
        ],
    )
    def test_invalid_parameters(self, build: Callable[[], CovarianceModel]) -> None:
        """Out-of-domain parameters raise InvalidModelError."""
        with pytest.raises(InvalidModelError):
            build()

    def test_mixture_needs_common_exponent(self) -> None:
        """Components with different hurst_eff are rejected."""
        with pytest.raises(InvalidModelError, match="share hurst_eff"):
            CovarianceModel.mixture(
                [(1.0, CovarianceModel.fbm(0.3)), (1.0, CovarianceModel.fbm(0.4))]
            )

    def test_effective_exponent(self) -> None:
        """hurst_eff is HK for the two-parameter families."""
        assert CovarianceModel.bifbm(0.6, 0.5).hurst_eff == pytest.approx(0.3)
        assert CovarianceModel.gensubfbm(0.2, 1.5).hurst_eff == pytest.approx(0.3)

    def test_bifbm_principal_scale(self) -> None:
        """bi-fBm principal part carries 2^(1-K)."""
        assert CovarianceModel.bifbm(0.6, 0.5).principal_scale == pytest.approx(2**0.5)

    def test_from_dict(self) -> None:
        """JSON descriptions parse, mixtures recursively."""
        model = CovarianceModel.from_dict(
            {
                "family": "mixture",
                "components": [
                    {"weight": 0.5, "family": "fbm", "H": 0.3},
                    {"weight": 1.0, "family": "bifbm", "H": 0.6, "K": 0.5},
                ],
            }
        )
        assert model.family is Family.MIXTURE
        assert model.components[1].model.k == 0.5
        assert CovarianceModel.from_dict(model.to_dict()) == model

    def test_from_dict_unknown_family(self) -> None:
        """Unknown families are rejected."""
        with pytest.raises(InvalidModelError, match="Unknown or missing family"):
            CovarianceModel.from_dict({"family": "levy", "H": 0.3})

    def test_from_dict_missing_hurst(self) -> None:
        """H is required outside mixtures."""
        with pytest.raises(InvalidModelError, match="Missing H"):
            CovarianceModel.from_dict({"family": "fbm"})


class TestIncrementCovariance:
    """Tests for the increment Gram assembly."""

    def test_brownian_increments(self) -> None:
        """H = 1/2 gives dt times the identity."""
        grid = GridSpec(2.0, 8)
        c = increment_covariance(CovarianceModel.fbm(0.5), grid)
        np.testing.assert_allclose(c, grid.dt * np.eye(8), atol=1e-14)

    def test_two_step_fbm(self) -> None:
        """FBM(0.3) on (T=1, n=2)."""
        c = increment_covariance(CovarianceModel.fbm(0.3), GridSpec(1.0, 2))
        assert c[0, 0] == pytest.approx(0.5**0.6)
        assert c[1, 1] == pytest.approx(0.5**0.6)
        assert c[0, 1] == pytest.approx(0.5 * (1 - 2 * 0.5**0.6))

    def test_positive_semidefinite(self, model: CovarianceModel) -> None:
        """Smallest eigenvalue is not materially negative."""
        c = increment_covariance(model, GridSpec(5.0, 50))
        eigenvalues = np.linalg.eigvalsh(c)
        assert eigenvalues[0] >= -1e-8 * eigenvalues[-1]


class TestCheckHypothesis:
    """Tests for the grid check of the remainder bound."""

    def test_fbm_has_no_remainder(self) -> None:
        """fBm reports a zero constant."""
        report = check_hypothesis(CovarianceModel.fbm(0.3), GridSpec(10.0, 100))
        assert report.c_prime_estimate == 0.0
        assert report.violations == 0
        assert report.passed

    def test_subfbm_constant(self) -> None:
        """sub-fBm stays under H(1-2H)2^(2H-2), the AM-GM bound."""
        report = check_hypothesis(CovarianceModel.subfbm(0.3), GridSpec(10.0, 200))
        bound = 0.3 * 0.4 * 2**-1.4
        assert report.passed
        assert 0 < report.c_prime_estimate <= bound
        assert report.c_prime_estimate > 0.9 * bound
        assert report.argmax is not None

    def test_bifbm_finite(self) -> None:
        """bi-fBm at hurst_eff 0.3 gives a finite constant."""
        report = check_hypothesis(CovarianceModel.bifbm(0.6, 0.5), GridSpec(10.0, 200))
        assert report.passed
        assert math.isfinite(report.c_prime_estimate)

    def test_stable_under_refinement(self, model: CovarianceModel) -> None:
        """The constant moves by at most 10% when the grid is refined twice."""
        coarse = check_hypothesis(model, GridSpec(10.0, 100), margin=0.1)
        fine = check_hypothesis(model, GridSpec(10.0, 200), margin=0.1)
        assert coarse.passed and fine.passed
        if coarse.c_prime_estimate > 0:
            assert fine.c_prime_estimate == pytest.approx(coarse.c_prime_estimate, rel=0.1)

    def test_margin_defaults_to_one_cell(self) -> None:
        """The margin is never below the grid spacing."""
        grid = GridSpec(10.0, 100)
        assert check_hypothesis(CovarianceModel.subfbm(0.3), grid).margin == grid.dt
        assert check_hypothesis(CovarianceModel.subfbm(0.3), grid, margin=0.01).margin == grid.dt

    def test_report_serializes(self) -> None:
        """to_dict carries the model and the location of the sup."""
        data = check_hypothesis(CovarianceModel.subfbm(0.3), GridSpec(4.0, 40)).to_dict()
        assert data["model"] == {"family": "subfbm", "H": 0.3}
        assert data["violations"] == 0
        assert data["argmax_t"] is not None
