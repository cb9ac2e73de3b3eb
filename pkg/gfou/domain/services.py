"""Monte Carlo harness: replications, aggregation and rate fits."""

import logging
import math
import os
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from typing import Any

import numpy as np

from gfou.domain.entities import (
    AsymptoticConstants,
    CellSummary,
    ChaosStats,
    EstimatorStats,
    ExperimentConfig,
    FloatArray,
    GridSpec,
    IncrementGram,
    McSummary,
    RateFit,
    ReplicationRecord,
)
from gfou.domain.estimators import asymptotic_constants, estimate_all
from gfou.domain.exceptions import (
    AccuracyError,
    DegenerateInputError,
    DomainError,
    ExperimentError,
    GfouError,
)
from gfou.domain.hilbert import Kernel2D, b_T
from gfou.domain.ports import IRecordWriter
from gfou.domain.quadrature import Tolerance
from gfou.domain.simulate import (
    JITTER_MAX,
    JITTER_START,
    QuadraticForm,
    build_gram,
    derive_seed,
    ou_from_path,
    quadratic_form,
    sample_path,
)
from gfou.domain.special import stationary_moment
from gfou.domain.statistics import (
    MIN_KS_SAMPLES,
    jackknife_variance_se,
    ks_distance,
    rate_fit,
    sample_variance,
)

UTC = timezone.utc

logger = logging.getLogger(__name__)

ESTIMATOR_FIELDS = {
    "me": "theta_tilde",
    "lse_naive": "theta_hat_naive",
    "lse_skorohod": "theta_hat_skorohod",
}

# Statistics whose KS distance is fitted against T
RATE_KEYS = ("me", "lse_skorohod", "q_t_a", "q_t_b")


class MonteCarloRunner:
    """Runs an ExperimentConfig cell by cell.

    Each T-cell factors its increment gram once and shares it read-only across a
    thread pool; replication r of cell i draws from the stream (master_seed, i, r).
    """

    def __init__(
        self,
        record_writer: IRecordWriter | None = None,
        failure_cap: float = 0.01,
        small_sample: int = MIN_KS_SAMPLES,
        jitter_start: float = JITTER_START,
        jitter_max: float = JITTER_MAX,
        tolerance: Tolerance | None = None,
        max_workers: int | None = None,
    ) -> None:
        """Initialize the runner.

        Args:
            record_writer: Sink for per-replication records (none: keep nothing)
            failure_cap: Largest tolerated fraction of failed replications per cell
            small_sample: Cells with fewer successful replications are flagged
            jitter_start: Relative Cholesky jitter of the first retry
            jitter_max: Largest relative Cholesky jitter
            tolerance: Quadrature settings for b_T
            max_workers: Upper bound on the worker count, on top of config.threads
        """
        if not 0 <= failure_cap < 1:
            raise ValueError(f"Invalid failure_cap: {failure_cap}")
        self.record_writer = record_writer
        self.failure_cap = failure_cap
        self.small_sample = small_sample
        self.jitter_start = jitter_start
        self.jitter_max = jitter_max
        self.tolerance = tolerance or Tolerance()
        self.max_workers = max_workers

    def workers(self, config: ExperimentConfig) -> int:
        """Thread count: config.threads (or all cores) capped by max_workers."""
        count = config.threads or os.cpu_count() or 1
        if self.max_workers is not None:
            count = min(count, self.max_workers)
        return max(1, count)

    def run_experiment(self, config: ExperimentConfig) -> McSummary:
        """Run every T-cell and aggregate.

        Raises:
            ExperimentError: If a cell loses more than failure_cap of its replications
            NonPsdError: If a cell's increment covariance cannot be factored
        """
        started = datetime.now(UTC)
        clock = time.perf_counter()
        constants = _constants(config)
        workers = self.workers(config)
        logger.info(
            "Starting experiment (%s, theta=%g, T=%s, n_reps=%d, workers=%d)",
            config.model.descriptor,
            config.theta_true,
            list(config.T_list),
            config.n_reps,
            workers,
        )

        cells: list[CellSummary] = []
        cell_seconds: list[float] = []
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for index, T in enumerate(config.T_list):
                cell_clock = time.perf_counter()
                cell = self._run_cell(config, index, T, constants, pool)
                cells.append(cell)
                cell_seconds.append(time.perf_counter() - cell_clock)
                logger.info(
                    "Cell T=%g done: %d/%d replications, %d failures, %.1fs",
                    T,
                    cell.replications,
                    config.n_reps,
                    cell.failures,
                    cell_seconds[-1],
                )

        runtime: dict[str, Any] = {
            "started_at": started.isoformat(),
            "wall_seconds": time.perf_counter() - clock,
            "cell_seconds": cell_seconds,
            "workers": workers,
        }
        return McSummary(
            config=config,
            cells=tuple(cells),
            rate_fits=_rate_fits(cells),
            runtime=runtime,
        )

    def _run_cell(
        self,
        config: ExperimentConfig,
        index: int,
        T: float,
        constants: AsymptoticConstants | None,
        pool: ThreadPoolExecutor,
    ) -> CellSummary:
        grid = GridSpec.from_horizon(T, config.steps_per_unit_time)
        gram = build_gram(config.model, grid, self.jitter_start, self.jitter_max)
        f_form = quadratic_form(Kernel2D.f_t(config.theta_true, T), gram)
        h_form = quadratic_form(Kernel2D.h_t(config.theta_true, T), gram)

        def replicate(r: int) -> ReplicationRecord | None:
            return _replicate(config, index, r, gram, f_form, h_form)

        results = list(pool.map(replicate, range(config.n_reps)))
        records = sorted(
            (rec for rec in results if rec is not None), key=lambda rec: rec.replication
        )
        failures = config.n_reps - len(records)
        if failures > self.failure_cap * config.n_reps:
            raise ExperimentError(
                f"Cell T={T:g}: {failures}/{config.n_reps} replications failed "
                f"(cap {self.failure_cap:.2%})"
            )
        if self.record_writer is not None:
            self.record_writer.write(records)

        b_t = self._b_t(config, T)
        small = len(records) < self.small_sample
        return CellSummary(
            T=T,
            n=grid.n,
            replications=len(records),
            failures=failures,
            small_sample=small,
            b_T=b_t,
            estimators={
                name: _estimator_stats(records, name, config, constants, small)
                for name in config.estimators
            },
            chaos=_chaos_stats(records, config, constants, b_t, small),
        )

    def _b_t(self, config: ExperimentConfig, T: float) -> float | None:
        try:
            return b_T(config.model, config.theta_true, T, tol=self.tolerance)
        except AccuracyError as e:
            logger.warning("b_T at T=%g did not converge, b_T normalization dropped: %s", T, e)
            return None


def _constants(config: ExperimentConfig) -> AsymptoticConstants | None:
    try:
        return asymptotic_constants(config.theta_true, config.hurst)
    except DomainError as e:
        logger.info("No limiting variances for this run: %s", e)
        return None


def _replicate(
    config: ExperimentConfig,
    index: int,
    r: int,
    gram: IncrementGram,
    f_form: QuadraticForm,
    h_form: QuadraticForm,
) -> ReplicationRecord | None:
    seed = derive_seed(config.master_seed, index, r)
    try:
        path = sample_path(gram, seed)
        trajectory = ou_from_path(path, config.model, config.theta_true, config.sigma)
        estimate = estimate_all(
            trajectory, gram, config.hurst, config.theta_true, config.estimators
        )
        return ReplicationRecord(
            replication=r,
            estimate=estimate,
            f_t=f_form(path.increments),
            j_t=h_form(path.increments),
        )
    except (GfouError, ValueError, FloatingPointError) as e:
        logger.warning("Replication %s failed: %s", seed, e)
        return None


def _ks(samples: FloatArray, target_variance: float | None, small: bool) -> float | None:
    if small or samples.size < MIN_KS_SAMPLES:
        return None
    if target_variance is None or not target_variance > 0:
        return None
    if not np.all(np.isfinite(samples)):
        return None
    return ks_distance(samples, math.sqrt(target_variance))


def _estimator_stats(
    records: Sequence[ReplicationRecord],
    name: str,
    config: ExperimentConfig,
    constants: AsymptoticConstants | None,
    small: bool,
) -> EstimatorStats:
    values = np.array([getattr(rec.estimate, ESTIMATOR_FIELDS[name]) for rec in records])
    theta = config.theta_true
    if values.size == 0:
        nan = math.nan
        return EstimatorStats(nan, nan, 0.0, 0.0, nan, 0.0, 0.0, None, None)
    T = records[0].estimate.T
    scaled = math.sqrt(T) * (values - theta)
    target: float | None = None
    if constants is not None:
        target = {"me": constants.me_var, "lse_skorohod": constants.lse_var}.get(name)
    return EstimatorStats(
        mean=float(np.mean(values)),
        median=float(np.median(values)),
        variance=sample_variance(values),
        variance_se=jackknife_variance_se(values),
        median_abs_error=float(np.median(np.abs(values - theta))),
        scaled_variance=sample_variance(scaled),
        scaled_variance_se=jackknife_variance_se(scaled),
        target_variance=target,
        ks=_ks(scaled, target, small),
    )


def _chaos_stats(
    records: Sequence[ReplicationRecord],
    config: ExperimentConfig,
    constants: AsymptoticConstants | None,
    b_t: float | None,
    small: bool,
) -> ChaosStats:
    q = np.array([rec.q_t for rec in records])
    f = np.array([rec.f_t for rec in records])
    target_a: float | None = None
    target_b: float | None = None
    if constants is not None:
        scale = 4 * config.theta_true * constants.sigma_H2
        a = stationary_moment(
            config.hurst, config.theta_true, config.model.principal_scale
        )
        target_a = scale * a**2
        target_b = None if b_t is None else scale * b_t**2
    return ChaosStats(
        variance=sample_variance(q),
        variance_se=jackknife_variance_se(q),
        f_variance=sample_variance(f),
        f_variance_se=jackknife_variance_se(f),
        target_variance_a=target_a,
        target_variance_b=target_b,
        ks_a=_ks(q, target_a, small),
        ks_b=_ks(q, target_b, small),
    )


def _rate_fits(cells: Sequence[CellSummary]) -> dict[str, RateFit | None]:
    series: dict[str, list[float | None]] = {key: [] for key in RATE_KEYS}
    for cell in cells:
        for key in ("me", "lse_skorohod"):
            stats = cell.estimators.get(key)
            series[key].append(None if stats is None else stats.ks)
        series["q_t_a"].append(cell.chaos.ks_a)
        series["q_t_b"].append(cell.chaos.ks_b)

    T_list = [cell.T for cell in cells]
    fits: dict[str, RateFit | None] = {}
    for key, ks_list in series.items():
        if any(ks is None for ks in ks_list):
            fits[key] = None
            continue
        try:
            fits[key] = rate_fit(T_list, [float(ks) for ks in ks_list if ks is not None])
        except DegenerateInputError as e:
            logger.debug("No rate fit for %s: %s", key, e)
            fits[key] = None
    return fits
