"""Exact Gaussian sampling on a grid, OU trajectories, and discrete chaos integrals."""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import linalg, signal

from gfou.domain.covariance import CovarianceModel, increment_covariance
from gfou.domain.entities import (
    FloatArray,
    GaussianPath,
    GridSpec,
    IncrementGram,
    Seed,
    Trajectory,
)
from gfou.domain.estimators import time_average_square
from gfou.domain.exceptions import GridMismatchError, NonPsdError
from gfou.domain.hilbert import Kernel2D, KernelKind, b_T
from gfou.domain.quadrature import Tolerance

logger = logging.getLogger(__name__)

JITTER_START = 1e-12
JITTER_MAX = 1e-8


def seed_sequence(seed: Seed) -> np.random.SeedSequence:
    """SeedSequence for a plain seed or a (master, cell, replication) tuple."""
    if isinstance(seed, tuple):
        return np.random.SeedSequence(list(seed))
    return np.random.SeedSequence(seed)


def derive_seed(master_seed: int, cell: int, replication: int) -> tuple[int, int, int]:
    """Seed of replication r in cell T_index; streams never repeat across cells."""
    return (master_seed, cell, replication)


def build_gram(
    model: CovarianceModel,
    grid: GridSpec,
    jitter_start: float = JITTER_START,
    jitter_max: float = JITTER_MAX,
) -> IncrementGram:
    """Increment covariance on grid and its lower Cholesky factor.

    The factorization is retried with diagonal jitter jitter_start * ||C||, growing
    tenfold up to jitter_max * ||C||, where ||C|| is the largest diagonal entry.

    Raises:
        NonPsdError: If the matrix cannot be factored even with the largest jitter
    """
    c = increment_covariance(model, grid)
    scale = float(np.max(np.abs(np.diag(c))))
    jitter = 0.0
    relative = jitter_start
    while True:
        try:
            chol = linalg.cholesky(c + jitter * np.eye(grid.n), lower=True)
            break
        except linalg.LinAlgError as e:
            if relative > jitter_max * (1 + 1e-9):
                raise NonPsdError(
                    f"Increment covariance of {model.descriptor} on T={grid.T:g}, n={grid.n} "
                    f"is not positive definite (jitter up to {jitter_max:g}*||C||)"
                ) from e
            jitter = relative * scale
            relative *= 10
            logger.warning(
                "Cholesky failed for %s (T=%g, n=%d); retrying with jitter %.3g",
                model.descriptor,
                grid.T,
                grid.n,
                jitter,
            )
    return IncrementGram(grid=grid, C=c, chol=chol, jitter=jitter, model=model)


def sample_path(gram: IncrementGram, seed: Seed) -> GaussianPath:
    """dG = chol z with z standard normal drawn from the seed's own stream."""
    rng = np.random.default_rng(seed_sequence(seed))
    z = rng.standard_normal(gram.grid.n)
    increments = gram.chol @ z
    path = np.concatenate([[0.0], np.cumsum(increments)])
    return GaussianPath(grid=gram.grid, increments=increments, path=path, seed=seed)


def ou_from_path(
    path: GaussianPath,
    model: CovarianceModel,
    theta: float,
    sigma: float,
    method: Literal["recursive", "sum"] = "recursive",
    x0: float = 0.0,
) -> Trajectory:
    """X_k = x0 e^(-theta t_k) + sum_(i<k) e^(-theta (t_k - t_i*)) sigma dG_i.

    The recursive form X_(k+1) = e^(-theta dt) X_k + sigma e^(-theta dt/2) dG_k is the
    same sum evaluated in O(n).
    """
    if not theta > 0:
        raise ValueError(f"Invalid theta: {theta}")
    grid = path.grid
    dt = grid.dt
    if method == "recursive":
        decay = np.exp(-theta * dt)
        driven = signal.lfilter([sigma * np.exp(-theta * dt / 2)], [1.0, -decay], path.increments)
    elif method == "sum":
        k = np.arange(1, grid.n + 1)[:, None]
        i = np.arange(grid.n)[None, :]
        weights = np.where(i < k, np.exp(-theta * dt * (k - i - 0.5)), 0.0)
        driven = sigma * (weights @ path.increments)
    else:
        raise ValueError(f"Invalid method: {method}")
    x = np.concatenate([[0.0], driven]) + x0 * np.exp(-theta * grid.times)
    x[0] = x0
    return Trajectory(
        grid=grid, X=x, model=model, theta=theta, sigma=sigma, seed=path.seed, noise=path, x0=x0
    )


def ou_trajectory(
    model: CovarianceModel,
    theta: float,
    sigma: float,
    grid: GridSpec,
    seed: Seed,
    gram: IncrementGram | None = None,
    method: Literal["recursive", "sum"] = "recursive",
    x0: float = 0.0,
) -> Trajectory:
    """Simulate dX = -theta X dt + sigma dG on grid from X_0 = x0.

    Args:
        model: Covariance of the driving noise G
        theta: Drift parameter (> 0)
        sigma: Noise amplitude
        grid: Simulation grid
        seed: Seed of the noise stream
        gram: Pre-built increment gram for (model, grid), built here when omitted
        method: "recursive" (default) or the explicit "sum"
        x0: Initial value

    Returns:
        Trajectory: Path with its driving noise attached
    """
    if not theta > 0:
        raise ValueError(f"Invalid theta: {theta}")
    if gram is None:
        gram = build_gram(model, grid)
    elif gram.grid != grid:
        raise GridMismatchError(f"Gram grid {gram.grid} != requested grid {grid}")
    return ou_from_path(sample_path(gram, seed), model, theta, sigma, method, x0)


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """Centered form q(dG) = dG^T K dG - trace(K C), with K stored densely or as a a^T."""

    grid: GridSpec
    centering: float  # trace(K C)
    matrix: FloatArray | None = None
    vector: FloatArray | None = None  # Rank-one factor a with K = a a^T

    def __call__(self, increments: FloatArray) -> float:
        if self.vector is not None:
            return float(np.dot(self.vector, increments) ** 2 - self.centering)
        assert self.matrix is not None
        return float(increments @ self.matrix @ increments - self.centering)

    def many(self, increments: FloatArray) -> FloatArray:
        """Evaluate on the rows of an (r, n) array."""
        if self.vector is not None:
            return (increments @ self.vector) ** 2 - self.centering
        assert self.matrix is not None
        return np.einsum("ri,ij,rj->r", increments, self.matrix, increments) - self.centering


def quadratic_form(kernel: Kernel2D, gram: IncrementGram) -> QuadraticForm:
    """Discrete double Wiener-Ito integral of kernel on the gram's grid.

    The kernel is evaluated at cell midpoints; diagonal terms are kept and centered.
    """
    grid = gram.grid
    if not np.isclose(kernel.T, grid.T, rtol=1e-12):
        raise GridMismatchError(f"Kernel horizon {kernel.T} != grid horizon {grid.T}")
    if kernel.kind is KernelKind.H_T:
        a = np.sqrt(kernel.scale) * np.exp(-kernel.theta * (kernel.T - grid.midpoints))
        return QuadraticForm(grid=grid, centering=float(a @ gram.C @ a), vector=a)
    k = kernel.matrix(grid)
    return QuadraticForm(grid=grid, centering=float(np.sum(k * gram.C)), matrix=k)


def chaos_I2(kernel: Kernel2D, path: GaussianPath, gram: IncrementGram) -> float:
    """sum_ij k(t_i*, t_j*) (dG_i dG_j - C_ij).

    Raises:
        GridMismatchError: If kernel, path and gram do not share a grid
    """
    if path.grid != gram.grid:
        raise GridMismatchError(f"Path grid {path.grid} != gram grid {gram.grid}")
    return quadratic_form(kernel, gram)(path.increments)


def decomposition_check(
    trajectory: Trajectory,
    gram: IncrementGram,
    theta: float | None = None,
    tol: Tolerance | None = None,
) -> float:
    """|(1/T) int X^2 dt - sigma^2 (I_2(g_T) + b_T)| for a simulated trajectory.

    Raises:
        GridMismatchError: If trajectory and gram live on different grids
    """
    if trajectory.grid != gram.grid:
        raise GridMismatchError(f"Trajectory grid {trajectory.grid} != gram grid {gram.grid}")
    if trajectory.noise is None:
        raise ValueError("decomposition_check needs the driving noise of the trajectory")
    if trajectory.x0 != 0:
        raise ValueError(f"decomposition_check needs x0 = 0, got {trajectory.x0}")
    theta = trajectory.theta if theta is None else theta
    T = trajectory.grid.T
    chaos = chaos_I2(Kernel2D.g_t(theta, T), trajectory.noise, gram)
    deterministic = b_T(gram.model, theta, T, tol=tol)
    return abs(time_average_square(trajectory) - trajectory.sigma**2 * (chaos + deterministic))
