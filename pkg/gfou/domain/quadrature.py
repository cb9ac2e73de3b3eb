"""Adaptive Gauss-Legendre quadrature with kink splits and singular stretching.

Every integral is cut into pieces at its break points. A piece that touches a point
where the integrand behaves like |x - p|^e (e non-integer) is mapped from [0, 1] by

    x = p +/- L y^q,   q = m / (1 + e),   m = ceil(4 (1 + e))

which turns |x - p|^e dx into a polynomial in y. Pieces are then bisected in y,
breadth first and vectorized over every panel of every integral in a batch, until
the difference between the n-point rule and the composite rule on the two halves
meets the tolerance share of the panel.
"""

import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy import special

from gfou.domain.exceptions import AccuracyError

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]
BoolArray = npt.NDArray[np.bool_]

BatchIntegrand = Callable[[FloatArray, IntArray], FloatArray]
Integrand = Callable[[FloatArray], FloatArray]

DEFAULT_RTOL = 1e-6
DEFAULT_ATOL = 1e-12
DEFAULT_MAX_DEPTH = 18
DEFAULT_ORDER = 10
DEFAULT_CHUNK = 2048

_ROUNDOFF = 64 * np.finfo(np.float64).eps


@lru_cache(maxsize=8)
def gauss_legendre_rule(order: int) -> tuple[FloatArray, FloatArray]:
    """Nodes and weights of the order-point Gauss-Legendre rule on [-1, 1]."""
    nodes, weights = special.roots_legendre(order)
    return np.asarray(nodes, dtype=np.float64), np.asarray(weights, dtype=np.float64)


def stretch_power(exponent: float | None) -> float:
    """Power q of the map x = p + L y^q that smooths |x - p|^exponent."""
    if exponent is None or float(exponent).is_integer():
        return 1.0
    if exponent <= -1:
        raise ValueError(f"Non-integrable exponent: {exponent}")
    m = math.ceil(4 * (1 + exponent))
    return m / (1 + exponent)


@dataclass(frozen=True)
class QuadratureResult:
    """Value and error estimate of a scalar integral."""

    value: float
    error: float
    panels: int
    depth: int
    converged: bool
    tree: tuple[tuple[float, float, float, float], ...] = ()  # (x_lo, x_hi, value, error)

    def to_dict(self) -> dict[str, Any]:
        """Serialize, including the panel tree when it was recorded."""
        result: dict[str, Any] = {
            "value": self.value,
            "error": self.error,
            "panels": self.panels,
            "depth": self.depth,
            "converged": self.converged,
        }
        if self.tree:
            result["tree"] = [
                {"x_lo": lo, "x_hi": hi, "value": v, "error": e} for lo, hi, v, e in self.tree
            ]
        return result


@dataclass(frozen=True, eq=False)
class BatchResult:
    """Values and error estimates of a batch of integrals."""

    values: FloatArray
    errors: FloatArray
    converged: BoolArray
    depth: int

    def raise_on_failure(self, label: str) -> None:
        """Raise AccuracyError for the worst unconverged integral, if any."""
        if bool(np.all(self.converged)):
            return
        bad = np.flatnonzero(~self.converged)
        worst = int(bad[np.argmax(self.errors[bad])])
        raise AccuracyError(
            f"{label}: {bad.size} integral(s) did not converge within depth {self.depth}",
            estimate=float(self.values[worst]),
            error_bound=float(self.errors[worst]),
        )


@dataclass(frozen=True, eq=False)
class _Pieces:
    owner: IntArray
    origin: FloatArray
    length: FloatArray
    direction: FloatArray
    power: FloatArray

    @classmethod
    def concat(cls, parts: Sequence["_Pieces"]) -> "_Pieces":
        return cls(
            owner=np.concatenate([p.owner for p in parts]),
            origin=np.concatenate([p.origin for p in parts]),
            length=np.concatenate([p.length for p in parts]),
            direction=np.concatenate([p.direction for p in parts]),
            power=np.concatenate([p.power for p in parts]),
        )

    def take(self, index: IntArray) -> "_Pieces":
        return _Pieces(
            self.owner[index],
            self.origin[index],
            self.length[index],
            self.direction[index],
            self.power[index],
        )


def _segment_pieces(
    owner: IntArray,
    lo: FloatArray,
    hi: FloatArray,
    lo_exponent: float | None,
    hi_exponent: float | None,
) -> _Pieces:
    """Pieces covering [lo, hi] for every owner, stretched toward singular ends."""
    keep = hi > lo
    owner, lo, hi = owner[keep], lo[keep], hi[keep]
    q_lo, q_hi = stretch_power(lo_exponent), stretch_power(hi_exponent)
    ones = np.ones_like(lo)

    if q_lo > 1 and q_hi > 1:
        mid = 0.5 * (lo + hi)
        return _Pieces.concat(
            [
                _Pieces(owner, lo, mid - lo, ones, q_lo * ones),
                _Pieces(owner, hi, hi - mid, -ones, q_hi * ones),
            ]
        )
    if q_hi > 1:
        return _Pieces(owner, hi, hi - lo, -ones, q_hi * ones)
    return _Pieces(owner, lo, hi - lo, ones, q_lo * ones)


def _map(pieces: _Pieces, y: FloatArray) -> tuple[FloatArray, FloatArray]:
    """x(y) and dx/dy for y of shape (P, m)."""
    q = pieces.power[:, None]
    length = pieces.length[:, None]
    yq = y**q
    x = pieces.origin[:, None] + pieces.direction[:, None] * length * yq
    with np.errstate(divide="ignore", invalid="ignore"):
        jac = np.where(y > 0, length * q * yq / y, 0.0)
    return x, jac


def _run(
    f: BatchIntegrand,
    pieces: _Pieces,
    n_owners: int,
    rtol: float,
    atol: float,
    max_depth: int,
    order: int,
    record: bool = False,
) -> tuple[BatchResult, list[tuple[float, float, float, float]], int]:
    nodes, weights = gauss_legendre_rule(order)
    half_nodes = 0.5 * (nodes + 1.0)  # on [0, 1]

    piece_count = np.bincount(pieces.owner, minlength=n_owners).astype(np.float64)
    piece_count[piece_count == 0] = 1.0

    panel_piece = np.arange(pieces.owner.size)
    y_lo = np.zeros(panel_piece.size)
    y_hi = np.ones(panel_piece.size)

    acc_value = np.zeros(n_owners)
    acc_error = np.zeros(n_owners)
    tree: list[tuple[float, float, float, float]] = []
    accepted_panels = 0
    level = 0

    while panel_piece.size:
        active = pieces.take(panel_piece)
        width = y_hi - y_lo
        mid = 0.5 * (y_lo + y_hi)
        y = np.concatenate(
            [
                y_lo[:, None] + width[:, None] * half_nodes[None, :],
                y_lo[:, None] + 0.5 * width[:, None] * half_nodes[None, :],
                mid[:, None] + 0.5 * width[:, None] * half_nodes[None, :],
            ],
            axis=1,
        )
        x, jac = _map(active, y)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            fx = np.asarray(f(x, active.owner[:, None]), dtype=np.float64)
            contrib = np.where(jac > 0, fx * jac, 0.0)
        coarse = 0.5 * width * (contrib[:, :order] @ weights)
        fine = 0.25 * width * (
            contrib[:, order : 2 * order] @ weights + contrib[:, 2 * order :] @ weights
        )
        err = np.abs(fine - coarse)

        current = acc_value + np.bincount(active.owner, weights=fine, minlength=n_owners)
        tol_owner = np.maximum(atol, rtol * np.abs(current))
        share = width / piece_count[active.owner]
        ok = (err <= tol_owner[active.owner] * share) | (err <= _ROUNDOFF * np.abs(fine))
        if level >= max_depth:
            ok = np.ones_like(ok)

        if np.any(ok):
            acc_value += np.bincount(active.owner[ok], weights=fine[ok], minlength=n_owners)
            acc_error += np.bincount(active.owner[ok], weights=err[ok], minlength=n_owners)
            accepted_panels += int(np.count_nonzero(ok))
            if record:
                x_lo, _ = _map(active.take(np.flatnonzero(ok)), y_lo[ok][:, None])
                x_hi, _ = _map(active.take(np.flatnonzero(ok)), y_hi[ok][:, None])
                for lo, hi, v, e in zip(
                    x_lo[:, 0], x_hi[:, 0], fine[ok], err[ok], strict=True
                ):
                    tree.append((float(min(lo, hi)), float(max(lo, hi)), float(v), float(e)))

        refine = ~ok
        panel_piece = np.repeat(panel_piece[refine], 2)
        new_lo = np.empty(panel_piece.size)
        new_hi = np.empty(panel_piece.size)
        new_lo[0::2], new_hi[0::2] = y_lo[refine], mid[refine]
        new_lo[1::2], new_hi[1::2] = mid[refine], y_hi[refine]
        y_lo, y_hi = new_lo, new_hi
        if panel_piece.size:
            level += 1

    tolerance = np.maximum(atol, rtol * np.abs(acc_value))
    converged = np.isfinite(acc_value) & (acc_error <= tolerance)
    tree.sort()
    return BatchResult(acc_value, acc_error, converged, level), tree, accepted_panels


def integrate(
    f: Integrand,
    a: float,
    b: float,
    *,
    points: Sequence[float] = (),
    exponents: Mapping[float, float] | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
    order: int = DEFAULT_ORDER,
    record: bool = False,
    label: str = "integral",
) -> QuadratureResult:
    """Integrate a vectorized f over [a, b].

    Args:
        f: Integrand accepting and returning arrays of equal shape
        a: Lower limit
        b: Upper limit (b >= a)
        points: Interior kinks where the interval is split
        exponents: Local exponent e at any of a, b or points, where f ~ |x - p|^e
        rtol: Relative tolerance
        atol: Absolute tolerance
        max_depth: Bisection depth cap
        order: Gauss-Legendre order
        record: Keep the accepted panel tree in the result
        label: Name used in error messages

    Returns:
        QuadratureResult: Value, error estimate and panel statistics

    Raises:
        AccuracyError: If the depth cap is reached before the tolerance
    """
    if b < a:
        raise ValueError(f"Invalid interval: [{a}, {b}]")
    exps = dict(exponents or {})
    cuts = sorted({a, b, *(p for p in points if a < p < b)})
    owner = np.zeros(1, dtype=np.int64)
    parts = [
        _segment_pieces(owner, np.array([lo]), np.array([hi]), exps.get(lo), exps.get(hi))
        for lo, hi in zip(cuts, cuts[1:], strict=False)
    ]
    if not parts:
        return QuadratureResult(0.0, 0.0, 0, 0, True)

    def batch_f(x: FloatArray, _owner: IntArray) -> FloatArray:
        return f(x)

    batch, tree, panels = _run(
        batch_f, _Pieces.concat(parts), 1, rtol, atol, max_depth, order, record
    )
    result = QuadratureResult(
        value=float(batch.values[0]),
        error=float(batch.errors[0]),
        panels=panels,
        depth=batch.depth,
        converged=bool(batch.converged[0]),
        tree=tuple(tree),
    )
    if not result.converged:
        logger.error("%s did not converge: %s", label, result.to_dict())
        raise AccuracyError(
            f"{label} did not converge within depth {max_depth}",
            estimate=result.value,
            error_bound=result.error,
        )
    return result


def integrate_batch(
    f: BatchIntegrand,
    lower: FloatArray,
    upper: FloatArray,
    *,
    kinks: FloatArray | None = None,
    lower_exponent: float | None = None,
    upper_exponent: float | None = None,
    kink_exponent: float | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
    order: int = DEFAULT_ORDER,
    chunk: int = DEFAULT_CHUNK,
) -> BatchResult:
    """Integrate f(x, i) over [lower[i], upper[i]] for every i at once.

    Args:
        f: Integrand; receives x and an owner index array broadcastable to x
        lower: Lower limits
        upper: Upper limits
        kinks: Optional per-integral split point (ignored when outside the interval)
        lower_exponent: Local exponent at the lower limits
        upper_exponent: Local exponent at the upper limits
        kink_exponent: Local exponent at the kinks
        rtol: Relative tolerance
        atol: Absolute tolerance
        max_depth: Bisection depth cap
        order: Gauss-Legendre order
        chunk: Maximum number of integrals refined together

    Returns:
        BatchResult: Values, error estimates and convergence flags
    """
    lower = np.asarray(lower, dtype=np.float64).ravel()
    upper = np.asarray(upper, dtype=np.float64).ravel()
    count = lower.size
    if kinks is None:
        kinks = np.full(count, np.nan)
    kinks = np.asarray(kinks, dtype=np.float64).ravel()

    values = np.zeros(count)
    errors = np.zeros(count)
    converged = np.ones(count, dtype=bool)
    depth = 0
    for start in range(0, count, chunk):
        stop = min(start + chunk, count)
        lo, hi, kk = lower[start:stop], upper[start:stop], kinks[start:stop]
        owner = np.arange(stop - start, dtype=np.int64)
        split = np.isfinite(kk) & (kk > lo) & (kk < hi)
        pieces = _Pieces.concat(
            [
                _segment_pieces(owner[split], lo[split], kk[split], lower_exponent, kink_exponent),
                _segment_pieces(owner[split], kk[split], hi[split], kink_exponent, upper_exponent),
                _segment_pieces(
                    owner[~split], lo[~split], hi[~split], lower_exponent, upper_exponent
                ),
            ]
        )
        offset = start

        def shifted(x: FloatArray, local: IntArray, offset: int = offset) -> FloatArray:
            return f(x, local + offset)

        batch, _, _ = _run(shifted, pieces, stop - start, rtol, atol, max_depth, order)
        values[start:stop] = batch.values
        errors[start:stop] = batch.errors
        converged[start:stop] = batch.converged
        depth = max(depth, batch.depth)
    return BatchResult(values, errors, converged, depth)


@dataclass(frozen=True)
class Extrapolation:
    """Richardson extrapolation of a sequence computed at halving step sizes."""

    value: float
    error: float
    order: float | None  # Estimated convergence order, None when not identifiable


def richardson(coarse_to_fine: Sequence[float], min_order: float = 0.25) -> Extrapolation:
    """Extrapolate three values at steps 4h, 2h, h with an estimated order.

    Falls back to the finest value when the differences do not contract.
    """
    if len(coarse_to_fine) < 2:
        raise ValueError("Need at least two levels")
    finest = float(coarse_to_fine[-1])
    previous = float(coarse_to_fine[-2])
    if len(coarse_to_fine) >= 3:
        d1 = float(coarse_to_fine[-2]) - float(coarse_to_fine[-3])
        d2 = finest - previous
        if d1 != 0 and d2 != 0 and np.sign(d1) == np.sign(d2) and abs(d2) < abs(d1):
            order = float(np.log2(abs(d1) / abs(d2)))
            if order >= min_order:
                correction = d2 / (2.0**order - 1.0)
                return Extrapolation(finest + correction, abs(correction), order)
    return Extrapolation(finest, abs(finest - previous), None)


@dataclass(frozen=True)
class Tolerance:
    """Quadrature settings passed down through nested integrals."""

    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    max_depth: int = DEFAULT_MAX_DEPTH
    order: int = DEFAULT_ORDER
    record_panels: bool = False  # Keep panel trees of outer integrals for debug dumps

    def __post_init__(self) -> None:
        """Validate tolerances."""
        if not 0 < self.rtol < 1:
            raise ValueError(f"Invalid rtol: {self.rtol}")
        if self.atol < 0:
            raise ValueError(f"Invalid atol: {self.atol}")
        if self.max_depth < 1:
            raise ValueError(f"Invalid max_depth: {self.max_depth}")
        if self.order < 2:
            raise ValueError(f"Invalid order: {self.order}")

    def tighter(self, factor: float = 10.0) -> "Tolerance":
        """Tolerance for inner integrals of a nested quadrature."""
        return Tolerance(self.rtol / factor, self.atol / factor, self.max_depth, self.order)

    def kwargs(self) -> dict[str, Any]:
        """Keyword arguments for integrate and integrate_batch."""
        return {
            "rtol": self.rtol,
            "atol": self.atol,
            "max_depth": self.max_depth,
            "order": self.order,
        }
