"""Unit tests for Gaussian sampling, OU trajectories and chaos integrals."""

import numpy as np
import pytest

from gfou.domain.covariance import CovarianceModel
from gfou.domain.entities import FloatArray, GridSpec
from gfou.domain.exceptions import GridMismatchError, NonPsdError
from gfou.domain.hilbert import Kernel2D, b_T
from gfou.domain.simulate import (
    QuadraticForm,
    build_gram,
    chaos_I2,
    decomposition_check,
    derive_seed,
    ou_from_path,
    ou_trajectory,
    quadratic_form,
    sample_path,
)


@pytest.fixture
def grid() -> GridSpec:
    """T = 4 with 80 steps."""
    return GridSpec(4.0, 80)


@pytest.fixture
def model() -> CovarianceModel:
    """Sub-fBm at H = 0.3."""
    return CovarianceModel.subfbm(0.3)


def _ou_weights(theta: float, grid: GridSpec) -> FloatArray:
    """Row k maps the increments to X at the last node."""
    i = np.arange(grid.n)
    return np.exp(-theta * grid.dt * (grid.n - i - 0.5))


class TestBuildGram:
    """Tests for the increment covariance factorization."""

    def test_brownian_is_diagonal(self, grid: GridSpec) -> None:
        """Brownian increments are independent with variance dt."""
        gram = build_gram(CovarianceModel.fbm(0.5), grid)
        np.testing.assert_allclose(gram.C, grid.dt * np.eye(grid.n), atol=1e-12)
        assert gram.jitter == 0.0

    def test_cholesky_reproduces_covariance(self, model: CovarianceModel, grid: GridSpec) -> None:
        """C = L L^T without jitter."""
        gram = build_gram(model, grid)
        assert gram.jitter == 0.0
        np.testing.assert_allclose(gram.chol @ gram.chol.T, gram.C, atol=1e-12)

    def test_superdiagonal_sums(self, model: CovarianceModel, grid: GridSpec) -> None:
        """S_1 is the trace of the first superdiagonal."""
        gram = build_gram(model, grid)
        assert gram.superdiagonal_sums.shape == (grid.n - 1,)
        assert gram.superdiagonal_sums[0] == pytest.approx(np.trace(gram.C, offset=1))

    def test_non_psd_raises(
        self, grid: GridSpec, monkeypatch: pytest.MonkeyPatch, caplog: pytest.LogCaptureFixture
    ) -> None:
        """An indefinite matrix exhausts the jitter ladder with warnings."""
        monkeypatch.setattr(
            "gfou.domain.simulate.increment_covariance", lambda _m, g: -np.eye(g.n)
        )
        with pytest.raises(NonPsdError, match="not positive definite"):
            build_gram(CovarianceModel.fbm(0.3), grid, jitter_start=1e-12, jitter_max=1e-10)
        assert "retrying with jitter" in caplog.text


class TestSampling:
    """Tests for seeded paths."""

    def test_path_starts_at_zero(self, model: CovarianceModel, grid: GridSpec) -> None:
        """G_0 = 0 and the path accumulates the increments."""
        path = sample_path(build_gram(model, grid), 11)
        assert path.path[0] == 0.0
        np.testing.assert_allclose(np.diff(path.path), path.increments)

    def test_seed_determinism(self, model: CovarianceModel, grid: GridSpec) -> None:
        """Equal seeds give equal paths; neighbouring replications differ."""
        gram = build_gram(model, grid)
        a = sample_path(gram, derive_seed(7, 0, 3))
        b = sample_path(gram, derive_seed(7, 0, 3))
        c = sample_path(gram, derive_seed(7, 0, 4))
        d = sample_path(gram, derive_seed(7, 1, 3))
        np.testing.assert_array_equal(a.increments, b.increments)
        assert not np.allclose(a.increments, c.increments)
        assert not np.allclose(a.increments, d.increments)

    def test_derive_seed(self) -> None:
        """Seeds are (master, cell, replication)."""
        assert derive_seed(42, 2, 9) == (42, 2, 9)


class TestOuTrajectory:
    """Tests for OU trajectories."""

    def test_methods_agree(self, model: CovarianceModel, grid: GridSpec) -> None:
        """The recursion evaluates the explicit sum."""
        path = sample_path(build_gram(model, grid), 5)
        recursive = ou_from_path(path, model, 0.8, 1.3, method="recursive", x0=0.5)
        explicit = ou_from_path(path, model, 0.8, 1.3, method="sum", x0=0.5)
        np.testing.assert_allclose(recursive.X, explicit.X, atol=1e-12)

    def test_initial_value(self, model: CovarianceModel, grid: GridSpec) -> None:
        """X_0 = x0 and the noise is attached."""
        traj = ou_trajectory(model, 1.0, 1.0, grid, 3, x0=2.0)
        assert traj.X[0] == 2.0
        assert traj.noise is not None
        assert traj.seed == 3

    def test_zero_noise_decays(self, model: CovarianceModel, grid: GridSpec) -> None:
        """sigma = 0 leaves x0 e^(-theta t)."""
        traj = ou_trajectory(model, 0.5, 0.0, grid, 3, x0=1.0)
        np.testing.assert_allclose(traj.X, np.exp(-0.5 * grid.times))

    def test_mean_reversion(self, model: CovarianceModel, grid: GridSpec) -> None:
        """A strong drift keeps the path closer to zero."""
        gram = build_gram(model, grid)
        strong = ou_trajectory(model, 20.0, 1.0, grid, 1, gram=gram)
        weak = ou_trajectory(model, 0.05, 1.0, grid, 1, gram=gram)
        assert np.std(strong.X) < np.std(weak.X)

    def test_grid_mismatch(self, model: CovarianceModel, grid: GridSpec) -> None:
        """A gram built on another grid is refused."""
        gram = build_gram(model, GridSpec(4.0, 40))
        with pytest.raises(GridMismatchError):
            ou_trajectory(model, 1.0, 1.0, grid, 1, gram=gram)

    def test_invalid_arguments(self, model: CovarianceModel, grid: GridSpec) -> None:
        """theta must be positive and the method known."""
        with pytest.raises(ValueError, match="Invalid theta"):
            ou_trajectory(model, 0.0, 1.0, grid, 1)
        path = sample_path(build_gram(model, grid), 1)
        with pytest.raises(ValueError, match="Invalid method"):
            ou_from_path(path, model, 1.0, 1.0, method="euler")  # type: ignore[arg-type]

    @pytest.mark.slow
    def test_terminal_variance(self, model: CovarianceModel, grid: GridSpec) -> None:
        """Var(X_T) matches w^T C w over many replications."""
        gram = build_gram(model, grid)
        w = _ou_weights(1.0, grid)
        expected = float(w @ gram.C @ w)
        finals = np.array(
            [ou_trajectory(model, 1.0, 1.0, grid, (1, 0, r), gram=gram).X[-1] for r in range(4000)]
        )
        assert np.mean(finals) == pytest.approx(0.0, abs=4 * np.sqrt(expected / 4000))
        assert np.var(finals, ddof=1) == pytest.approx(expected, rel=0.1)


class TestQuadraticForms:
    """Tests for the discrete double integrals."""

    def test_rank_one_matches_dense(self, model: CovarianceModel, grid: GridSpec) -> None:
        """The rank-one h_T form equals the dense evaluation."""
        gram = build_gram(model, grid)
        kernel = Kernel2D.h_t(0.7, grid.T)
        k = kernel.matrix(grid)
        dense = QuadraticForm(grid=grid, centering=float(np.sum(k * gram.C)), matrix=k)
        fast = quadratic_form(kernel, gram)
        assert fast.vector is not None
        path = sample_path(gram, 2)
        assert fast(path.increments) == pytest.approx(dense(path.increments), abs=1e-10)

    def test_many_matches_single(self, model: CovarianceModel, grid: GridSpec) -> None:
        """Row-wise evaluation matches single calls."""
        gram = build_gram(model, grid)
        form = quadratic_form(Kernel2D.f_t(1.0, grid.T), gram)
        rows = np.stack([sample_path(gram, s).increments for s in range(3)])
        np.testing.assert_allclose(form.many(rows), [form(r) for r in rows], rtol=1e-12)

    def test_zero_kernel(self, model: CovarianceModel, grid: GridSpec) -> None:
        """I_2(0) = 0."""
        gram = build_gram(model, grid)
        path = sample_path(gram, 1)
        assert chaos_I2(Kernel2D.zero(1.0, grid.T), path, gram) == 0.0

    def test_centered(self, model: CovarianceModel, grid: GridSpec) -> None:
        """E I_2(f_T) = 0 and Var I_2(f_T) = 2 trace(KCKC)."""
        gram = build_gram(model, grid)
        form = quadratic_form(Kernel2D.f_t(1.0, grid.T), gram)
        rng = np.random.default_rng(0)
        rows = rng.standard_normal((20000, grid.n)) @ gram.chol.T
        values = form.many(rows)
        assert form.matrix is not None
        kc = form.matrix @ gram.C
        variance = 2 * float(np.sum(kc * kc.T))
        assert np.mean(values) == pytest.approx(0.0, abs=4 * np.sqrt(variance / 20000))
        assert np.var(values) == pytest.approx(variance, rel=0.1)

    def test_horizon_mismatch(self, model: CovarianceModel, grid: GridSpec) -> None:
        """Kernel and grid must share T."""
        gram = build_gram(model, grid)
        with pytest.raises(GridMismatchError):
            quadratic_form(Kernel2D.f_t(1.0, 5.0), gram)


class TestDecomposition:
    """Tests for (1/T) int X^2 dt = sigma^2 (I_2(g_T) + b_T)."""

    def test_requires_zero_start(self, model: CovarianceModel, grid: GridSpec) -> None:
        """x0 != 0 is refused."""
        gram = build_gram(model, grid)
        traj = ou_trajectory(model, 1.0, 1.0, grid, 1, gram=gram, x0=1.0)
        with pytest.raises(ValueError, match="x0 = 0"):
            decomposition_check(traj, gram)

    def test_grid_mismatch(self, model: CovarianceModel, grid: GridSpec) -> None:
        """Trajectory and gram must share a grid."""
        traj = ou_trajectory(model, 1.0, 1.0, grid, 1)
        with pytest.raises(GridMismatchError):
            decomposition_check(traj, build_gram(model, GridSpec(4.0, 40)))

    @pytest.mark.slow
    def test_residual_small_on_fine_grid(self) -> None:
        """The identity holds up to discretization for Brownian noise."""
        model = CovarianceModel.fbm(0.5)
        fine = GridSpec(4.0, 1000)
        gram = build_gram(model, fine)
        traj = ou_trajectory(model, 1.0, 1.0, fine, 9, gram=gram)
        assert decomposition_check(traj, gram) < 0.05

    @pytest.mark.slow
    def test_residual_fbm_shrinks_with_grid(self) -> None:
        """For FBM(0.3) at T = 20 the mean residual is within 5% of b_T and halving dt helps."""
        model = CovarianceModel.fbm(0.3)
        T, seeds = 20.0, range(50)
        means = []
        for n in (1000, 2000):
            grid = GridSpec(T, n)
            gram = build_gram(model, grid)
            residuals = [
                decomposition_check(ou_trajectory(model, 1.0, 1.0, grid, seed, gram=gram), gram)
                for seed in seeds
            ]
            means.append(float(np.mean(residuals)))
        assert means[1] <= 0.05 * b_T(model, 1.0, T)
        assert means[1] < means[0]
