"""Inner products on the Hilbert space of the noise, kernel norms, and b_T.

A function g supported in [0, T] is represented by the signed measure nu_g with
g(u) = nu_g((u, inf)). Then

    <f, g>_h = int int R(r, s) nu_f(dr) nu_g(ds)

which only ever evaluates the continuous covariance R. Step functions give atoms
(the double sum over rectangles), exponential segments give an atom at their end
plus an exponential density, and the smooth parts are handled by the adaptive
quadrature with splits at the diagonal and the axes.

Two-variable kernels are integrals of chi_w x chi_w over the OU segments
chi_w = e^(-theta(w - .)) 1_[0,w). Their norms and contractions reduce to traces over
the table <chi_w, chi_z>_h, integrated in w and z by the trapezoid rule and
extrapolated in the cell width. The older projection on the increment Gram matrix is
kept as an independent cross-check.
"""

import json
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum
from typing import Any, Literal

import numpy as np

from gfou.domain.covariance import CovarianceModel, increment_covariance
from gfou.domain.entities import FloatArray, GridSpec
from gfou.domain.exceptions import AccuracyError, ComplexityError
from gfou.domain.quadrature import (
    BoolArray,
    IntArray,
    QuadratureResult,
    Tolerance,
    gauss_legendre_rule,
    integrate,
    integrate_batch,
    richardson,
)

logger = logging.getLogger(__name__)

NORM_RTOL = 1e-4
CELLS_PER_UNIT = 4.0
MIN_CELLS = 8
MAX_NORM_CELLS = 3200
MAX_CONTRACTION_CELLS = 2400
_CELL_CHUNK = 4_000_000  # Covariance evaluations per block of regular cells


@dataclass(frozen=True)
class Estimate:
    """A computed value with its error estimate."""

    value: float
    error: float

    def to_dict(self) -> dict[str, float]:
        return {"value": self.value, "error": self.error}


@dataclass(frozen=True)
class ExpDensity:
    """Density amplitude * exp(rate * (x - anchor)) on (lo, hi)."""

    lo: float
    hi: float
    amplitude: float
    rate: float
    anchor: float

    def __call__(self, x: FloatArray) -> FloatArray:
        return self.amplitude * np.exp(self.rate * (x - self.anchor))


@dataclass(frozen=True, eq=False)
class SignedMeasure:
    """nu = sum_k w_k delta_{p_k} + sum of exponential densities."""

    positions: FloatArray
    weights: FloatArray
    densities: tuple[ExpDensity, ...] = ()

    @property
    def total_variation(self) -> float:
        """Total variation of the atomic part plus the densities."""
        total = float(np.sum(np.abs(self.weights)))
        for d in self.densities:
            if d.rate == 0:
                total += abs(d.amplitude) * (d.hi - d.lo)
            else:
                total += abs(
                    d.amplitude
                    * (math.exp(d.rate * (d.hi - d.anchor)) - math.exp(d.rate * (d.lo - d.anchor)))
                    / d.rate
                )
        return total


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-open step function: values[k] on [breakpoints[k], breakpoints[k+1])."""

    breakpoints: FloatArray
    values: FloatArray

    def __post_init__(self) -> None:
        """Validate breakpoints and values."""
        bp = np.asarray(self.breakpoints, dtype=np.float64)
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError(f"Invalid breakpoints: {bp}")
        if np.any(np.diff(bp) <= 0) or bp[0] < 0:
            raise ValueError(f"Breakpoints must be increasing and nonnegative: {bp}")
        if vals.shape != (bp.size - 1,):
            raise ValueError(f"Invalid values length: {vals.size}, expected {bp.size - 1}")

    @classmethod
    def indicator(cls, a: float, b: float, value: float = 1.0) -> "StepFunction":
        """value * 1_[a, b)."""
        return cls(np.array([a, b]), np.array([value]))

    def __call__(self, u: FloatArray | float) -> FloatArray:
        u_arr = np.asarray(u, dtype=np.float64)
        idx = np.searchsorted(self.breakpoints, u_arr, side="right") - 1
        inside = (idx >= 0) & (idx < self.values.size)
        return np.where(inside, self.values[np.clip(idx, 0, self.values.size - 1)], 0.0)

    def measure(self) -> SignedMeasure:
        """Jumps c_k = v_{k-1} - v_k at the breakpoints (v_{-1} = v_m = 0)."""
        padded = np.concatenate([[0.0], self.values, [0.0]])
        return SignedMeasure(self.breakpoints.copy(), padded[:-1] - padded[1:])

    def mu_abs(self, hurst: float) -> float:
        """int |f(x)| x^(H-1) dx, exact."""
        bp = self.breakpoints**hurst
        return float(np.sum(np.abs(self.values) * np.diff(bp)) / hurst)

    def __add__(self, other: "StepFunction") -> "StepFunction":
        merged = np.union1d(self.breakpoints, other.breakpoints)
        left = merged[:-1]
        return StepFunction(merged, self(left) + other(left))

    def __mul__(self, scalar: float) -> "StepFunction":
        return StepFunction(self.breakpoints.copy(), self.values * scalar)

    __rmul__ = __mul__


class ExpKind(Enum):
    """Kinds of piecewise exponential functions."""

    OU_SEGMENT = "ou_segment"
    CONST_SEGMENT = "const_segment"


@dataclass(frozen=True)
class ExpKernelFunction:
    """u -> exp(-theta (t - u)) 1_[0,t)(u), or c 1_[a,b)(u)."""

    kind: ExpKind
    theta: float = 0.0
    t: float = 0.0
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self) -> None:
        """Validate parameters."""
        if self.kind is ExpKind.OU_SEGMENT:
            if not self.theta > 0:
                raise ValueError(f"Invalid theta: {self.theta}")
            if self.t < 0:
                raise ValueError(f"Invalid t: {self.t}")
        elif not 0 <= self.a <= self.b:
            raise ValueError(f"Invalid segment: [{self.a}, {self.b})")

    @classmethod
    def ou_segment(cls, theta: float, t: float) -> "ExpKernelFunction":
        return cls(ExpKind.OU_SEGMENT, theta=theta, t=t)

    @classmethod
    def const_segment(cls, a: float, b: float, c: float) -> "ExpKernelFunction":
        return cls(ExpKind.CONST_SEGMENT, a=a, b=b, c=c)

    def __call__(self, u: FloatArray | float) -> FloatArray:
        u_arr = np.asarray(u, dtype=np.float64)
        if self.kind is ExpKind.OU_SEGMENT:
            inside = (u_arr >= 0) & (u_arr < self.t)
            return np.where(inside, np.exp(-self.theta * (self.t - u_arr)), 0.0)
        inside = (u_arr >= self.a) & (u_arr < self.b)
        return np.where(inside, self.c, 0.0)

    def measure(self) -> SignedMeasure:
        """delta_t - theta e^(-theta(t-s)) ds for OU segments, c(delta_b - delta_a) otherwise."""
        if self.kind is ExpKind.OU_SEGMENT:
            if self.t == 0:
                return SignedMeasure(np.zeros(0), np.zeros(0))
            density = ExpDensity(0.0, self.t, -self.theta, self.theta, self.t)
            return SignedMeasure(np.array([self.t]), np.array([1.0]), (density,))
        return SignedMeasure(np.array([self.a, self.b]), np.array([-self.c, self.c]))

    def mu_abs(self, hurst: float, tol: Tolerance | None = None) -> float:
        """int |f(x)| x^(H-1) dx."""
        if self.kind is ExpKind.CONST_SEGMENT:
            return abs(self.c) * (self.b**hurst - self.a**hurst) / hurst
        if self.t == 0:
            return 0.0
        tol = tol or Tolerance()
        theta, t = self.theta, self.t
        result = integrate(
            lambda x: np.exp(-theta * (t - x)) * x ** (hurst - 1),
            0.0,
            t,
            exponents={0.0: hurst - 1},
            label="mu_abs",
            **tol.kwargs(),
        )
        return result.value


HFunction = StepFunction | ExpKernelFunction


def inner_h_estimate(
    model: CovarianceModel, f: HFunction, g: HFunction, tol: Tolerance | None = None
) -> Estimate:
    """<f, g>_h with an error estimate (zero for step-step pairs).

    Raises:
        AccuracyError: If any of the underlying quadratures does not converge
    """
    tol = tol or Tolerance()
    return _pair(model, f.measure(), g.measure(), tol)


def inner_h(
    model: CovarianceModel, f: HFunction, g: HFunction, tol: Tolerance | None = None
) -> float:
    """<f, g>_h for the noise with covariance model."""
    return inner_h_estimate(model, f, g, tol).value


def inner_h1(
    model: CovarianceModel, f: HFunction, g: HFunction, tol: Tolerance | None = None
) -> float:
    """<f, g>_h1: the same pairing under the fBm principal part of model."""
    return inner_h_estimate(model.principal_model(), f, g, tol).value


def inner_h2(
    f: HFunction, g: HFunction, c_prime: float, hurst: float, tol: Tolerance | None = None
) -> float:
    """C'_H mu(|f|) mu(|g|) with mu(dx) = x^(H-1) dx."""
    if not 0 < hurst < 1:
        raise ValueError(f"Invalid H: {hurst}")
    if c_prime < 0:
        raise ValueError(f"Invalid c_prime: {c_prime}")
    return c_prime * _mu_abs(f, hurst, tol) * _mu_abs(g, hurst, tol)


def _mu_abs(f: HFunction, hurst: float, tol: Tolerance | None) -> float:
    if isinstance(f, ExpKernelFunction):
        return f.mu_abs(hurst, tol)
    return f.mu_abs(hurst)


def _pair(
    model: CovarianceModel, mf: SignedMeasure, mg: SignedMeasure, tol: Tolerance
) -> Estimate:
    value = 0.0
    error = 0.0
    if mf.positions.size and mg.positions.size:
        gram = model.cov(mf.positions[:, None], mg.positions[None, :])
        value += float(mf.weights @ gram @ mg.weights)

    for atoms, densities in ((mf, mg.densities), (mg, mf.densities)):
        for density in densities:
            part = _atoms_density(model, atoms, density, tol)
            value += part.value
            error += part.error

    for df in mf.densities:
        for dg in mg.densities:
            part = _density_density(model, df, dg, tol)
            value += part.value
            error += part.error
    return Estimate(value, error)


def _atoms_density(
    model: CovarianceModel, atoms: SignedMeasure, density: ExpDensity, tol: Tolerance
) -> Estimate:
    """sum_k w_k int R(p_k, s) rho(s) ds."""
    if atoms.positions.size == 0 or density.hi <= density.lo:
        return Estimate(0.0, 0.0)
    positions = atoms.positions

    def integrand(x: FloatArray, owner: IntArray) -> FloatArray:
        return model.cov(positions[owner], x) * density(x)

    count = positions.size
    batch = integrate_batch(
        integrand,
        np.full(count, density.lo),
        np.full(count, density.hi),
        kinks=positions,
        lower_exponent=model.axis_exponent if density.lo == 0 else None,
        upper_exponent=2 * model.hurst_eff,
        kink_exponent=2 * model.hurst_eff,
        **tol.kwargs(),
    )
    batch.raise_on_failure("inner_h atom-density")
    return Estimate(
        float(atoms.weights @ batch.values), float(np.abs(atoms.weights) @ batch.errors)
    )


def _density_density(
    model: CovarianceModel, df: ExpDensity, dg: ExpDensity, tol: Tolerance
) -> Estimate:
    """int int R(r, s) rho_f(r) rho_g(s) dr ds, inner integral batched over r."""
    inner_tol = tol.tighter()
    diag = 2 * model.hurst_eff

    def outer(r: FloatArray) -> FloatArray:
        flat = r.ravel()
        batch = integrate_batch(
            lambda x, owner: model.cov(flat[owner], x) * dg(x),
            np.full(flat.size, dg.lo),
            np.full(flat.size, dg.hi),
            kinks=flat,
            lower_exponent=model.axis_exponent if dg.lo == 0 else None,
            upper_exponent=diag,
            kink_exponent=diag,
            **inner_tol.kwargs(),
        )
        batch.raise_on_failure("inner_h inner integral")
        return (batch.values * df(flat)).reshape(r.shape)

    points = [p for p in (dg.lo, dg.hi) if df.lo < p < df.hi]
    exponents = {p: diag + 1 for p in points}
    if df.lo == 0:
        exponents[0.0] = model.axis_exponent
    result = integrate(
        outer,
        df.lo,
        df.hi,
        points=points,
        exponents=exponents,
        label="inner_h outer integral",
        **tol.kwargs(),
    )
    return Estimate(result.value, result.error)


def b_T_estimate(
    model: CovarianceModel,
    theta: float,
    T: float,
    method: Literal["folded", "nested"] = "folded",
    tol: Tolerance | None = None,
) -> Estimate:
    """b_T = (1/T) int_0^T ||e^(-theta(t - .)) 1_[0,t)||_h^2 dt with an error estimate.

    The folded method integrates the outer t analytically:

        T b_T = int_0^T R(t,t) dt
                - theta int_0^T int_0^r R(r,s) [e^(-theta(r-s)) + e^(-theta(2T-r-s))] ds dr

    which costs one 2-D integral regardless of T. The nested method integrates the
    norms literally and its cost grows with T (one 2-D integral per outer node);
    keep it to T of order 10.
    """
    if not theta > 0:
        raise ValueError(f"Invalid theta: {theta}")
    if T < 0:
        raise ValueError(f"Invalid T: {T}")
    if T == 0:
        return Estimate(0.0, 0.0)
    tol = tol or Tolerance()
    if method == "nested":
        return _b_t_nested(model, theta, T, tol)
    if method != "folded":
        raise ValueError(f"Invalid method: {method}")
    return _b_t_folded(model, theta, T, tol)


def b_T(
    model: CovarianceModel,
    theta: float,
    T: float,
    method: Literal["folded", "nested"] = "folded",
    tol: Tolerance | None = None,
) -> float:
    """b_T, the deterministic part of (1/T) int X^2 dt."""
    return b_T_estimate(model, theta, T, method, tol).value


def _b_t_folded(model: CovarianceModel, theta: float, T: float, tol: Tolerance) -> Estimate:
    a = model.hurst_eff
    inner_tol = tol.tighter()

    diagonal = integrate(
        lambda t: model.cov(t, t),
        0.0,
        T,
        exponents={0.0: 2 * a},
        label="b_T diagonal",
        **tol.kwargs(),
    )

    def outer(r: FloatArray) -> FloatArray:
        flat = r.ravel()

        def integrand(s: FloatArray, owner: IntArray) -> FloatArray:
            rr = flat[owner]
            weight = np.exp(-theta * (rr - s)) + np.exp(-theta * (2 * T - rr - s))
            return model.cov(rr, s) * weight

        batch = integrate_batch(
            integrand,
            np.zeros(flat.size),
            flat,
            lower_exponent=model.axis_exponent,
            upper_exponent=2 * a,
            **inner_tol.kwargs(),
        )
        batch.raise_on_failure("b_T inner integral")
        return batch.values.reshape(r.shape)

    cross = integrate(
        outer,
        0.0,
        T,
        exponents={0.0: model.axis_exponent + 1},
        record=tol.record_panels,
        label="b_T cross term",
        **tol.kwargs(),
    )
    _dump_panels("b_T cross term", cross)
    value = (diagonal.value - theta * cross.value) / T
    error = (diagonal.error + theta * cross.error) / T
    logger.debug(
        "b_T(%s, theta=%g, T=%g) = %.10g +- %.2g", model.descriptor, theta, T, value, error
    )
    return Estimate(value, error)


def _b_t_nested(model: CovarianceModel, theta: float, T: float, tol: Tolerance) -> Estimate:
    inner_tol = tol.tighter()

    def norm_sq(t: FloatArray) -> FloatArray:
        out = np.empty(t.size)
        for i, ti in enumerate(t.ravel()):
            segment = ExpKernelFunction.ou_segment(theta, float(ti))
            out[i] = inner_h(model, segment, segment, inner_tol)
        return out.reshape(t.shape)

    result = integrate(
        norm_sq,
        0.0,
        T,
        exponents={0.0: 2 * model.hurst_eff},
        record=tol.record_panels,
        label="b_T outer integral",
        **tol.kwargs(),
    )
    _dump_panels("b_T outer integral", result)
    return Estimate(result.value / T, result.error / T)


def _dump_panels(label: str, result: QuadratureResult) -> None:
    if result.tree:
        logger.debug("%s panels: %s", label, json.dumps(result.to_dict()))


class KernelKind(Enum):
    """Two-variable kernels of the quadratic functionals of X."""

    F_T = "f_T"
    H_T = "h_T"
    G_T = "g_T"


@dataclass(frozen=True)
class Kernel2D:
    """f_T = e^(-theta|u-v|), h_T = e^(-theta(2T-u-v)), g_T = (f_T - h_T)/(2 theta T) on [0,T]^2."""

    kind: KernelKind
    theta: float
    T: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        """Validate parameters."""
        if not self.theta > 0:
            raise ValueError(f"Invalid theta: {self.theta}")
        if not self.T > 0:
            raise ValueError(f"Invalid T: {self.T}")

    @classmethod
    def f_t(cls, theta: float, T: float) -> "Kernel2D":
        return cls(KernelKind.F_T, theta, T)

    @classmethod
    def h_t(cls, theta: float, T: float) -> "Kernel2D":
        return cls(KernelKind.H_T, theta, T)

    @classmethod
    def g_t(cls, theta: float, T: float) -> "Kernel2D":
        return cls(KernelKind.G_T, theta, T)

    @classmethod
    def zero(cls, theta: float, T: float) -> "Kernel2D":
        return cls(KernelKind.F_T, theta, T, scale=0.0)

    def __call__(self, u: FloatArray | float, v: FloatArray | float) -> FloatArray:
        u_arr = np.asarray(u, dtype=np.float64)
        v_arr = np.asarray(v, dtype=np.float64)
        inside = (u_arr >= 0) & (u_arr <= self.T) & (v_arr >= 0) & (v_arr <= self.T)
        theta, T = self.theta, self.T
        f = np.exp(-theta * np.abs(u_arr - v_arr))
        h = np.exp(-theta * (2 * T - u_arr - v_arr))
        if self.kind is KernelKind.F_T:
            values = f
        elif self.kind is KernelKind.H_T:
            values = h
        else:
            values = (f - h) / (2 * theta * T)
        return np.where(inside, self.scale * values, 0.0)

    def matrix(self, grid: GridSpec) -> FloatArray:
        """Kernel at the cell midpoints of grid."""
        mid = grid.midpoints
        return self(mid[:, None], mid[None, :])

    @property
    def segment_coefficients(self) -> tuple[float, float]:
        """(atom, density) with kernel / scale = atom chi_T x chi_T + density int chi_w x chi_w dw.

        chi_w = e^(-theta(w - .)) 1_[0,w) and the integral runs over w in [0, T]; this is
        e^(-theta|u-v|) = e^(-theta(2T-u-v)) + 2 theta int_(max(u,v))^T e^(-theta(2w-u-v)) dw.
        """
        if self.kind is KernelKind.F_T:
            return 1.0, 2 * self.theta
        if self.kind is KernelKind.H_T:
            return 1.0, 0.0
        return 0.0, 1.0 / self.T

    def segment_weights(self, grid: GridSpec) -> FloatArray:
        """Trapezoid weights on grid.times of the measure in segment_coefficients."""
        if grid.T != self.T:
            raise ValueError(f"Grid horizon {grid.T} != kernel horizon {self.T}")
        atom, density = self.segment_coefficients
        weights = np.full(grid.n + 1, density * grid.dt)
        weights[[0, -1]] *= 0.5
        weights[-1] += atom
        return self.scale * weights

    @property
    def label(self) -> str:
        return f"{self.kind.value}(theta={self.theta:g},T={self.T:g})"


@dataclass(frozen=True)
class NormResult:
    """Extrapolated norm with its per-level history."""

    value: float  # The norm (not its square)
    error: float
    cells: tuple[int, ...]
    squares: tuple[float, ...]  # Squared norm at each level
    order: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "error": self.error,
            "cells": list(self.cells),
            "squares": list(self.squares),
            "order": self.order,
        }

    def within(self, rtol: float) -> bool:
        """Error estimate inside rtol (a zero norm always is)."""
        return self.value == 0 or self.error <= rtol * self.value


def segment_pairings(
    model: CovarianceModel, theta: float, grid: GridSpec, tol: Tolerance | None = None
) -> FloatArray:
    """P_kl = <chi_k, chi_l>_h for the OU segments chi_k = e^(-theta(t_k - .)) 1_[0,t_k).

    chi_k has the measure delta_(t_k) - theta e^(-theta(t_k - r)) dr on (0, t_k), so

        P_kl = R(t_k, t_l) - theta I_kl - theta I_lk + theta^2 J_kl
        I_kl = int_0^t_l e^(-theta(t_l - s)) R(t_k, s) ds
        J_kl = int_0^t_k int_0^t_l e^(-theta(t_k - r)) e^(-theta(t_l - s)) R(r, s) ds dr

    with I and J accumulated cell by cell from 0. Cells at least one cell away from the
    axes and the diagonal get a fixed tensor Gauss-Legendre rule; the others go through
    the adaptive quadrature with its kink and singular-end splitting.

    Raises:
        AccuracyError: If an adaptive cell integral does not converge
    """
    if not theta > 0:
        raise ValueError(f"Invalid theta: {theta}")
    tol = tol or Tolerance()
    t = grid.times
    m, h = grid.n, grid.dt
    decay = math.exp(-theta * h)

    nodes, gl_weights = gauss_legendre_rule(tol.order)
    q = nodes.size
    frac = 0.5 * (nodes + 1.0)
    cell_weights = 0.5 * h * gl_weights * np.exp(-theta * h * (1.0 - frac))
    u = (t[:-1, None] + h * frac[None, :]).ravel()
    wu = np.tile(cell_weights, m)

    line = (model.cov(t[:, None], u[None, :]) * wu[None, :]).reshape(m + 1, m, q).sum(axis=2)
    a_idx, c_idx = np.nonzero(_singular_line_cells(m))
    line[a_idx, c_idx] = _line_cells(model, theta, t, a_idx, c_idx, tol)

    cells = np.empty((m, m))
    rows = max(1, _CELL_CHUNK // (q * q * m))
    for start in range(0, m, rows):
        stop = min(m, start + rows)
        block = model.cov(u[start * q : stop * q, None], u[None, :])
        block *= wu[start * q : stop * q, None] * wu[None, :]
        cells[start:stop] = block.reshape(stop - start, q, m, q).sum(axis=(1, 3))
    k_idx, l_idx = np.nonzero(_singular_square_cells(m))
    values = _square_cells(model, theta, t, k_idx, l_idx, tol)
    cells[k_idx, l_idx] = values
    cells[l_idx, k_idx] = values

    inner = np.zeros((m + 1, m + 1))
    for c in range(m):
        inner[:, c + 1] = decay * inner[:, c] + line[:, c]
    strips = np.zeros((m, m + 1))
    for c in range(m):
        strips[:, c + 1] = decay * strips[:, c] + cells[:, c]
    double = np.zeros((m + 1, m + 1))
    for k in range(m):
        double[k + 1] = decay * double[k] + strips[k]

    pairings = model.cov(t[:, None], t[None, :]) - theta * (inner + inner.T) + theta**2 * double
    logger.debug("segment pairings %s, theta=%g on %d cells", model.descriptor, theta, m)
    return 0.5 * (pairings + pairings.T)


def _singular_line_cells(m: int) -> BoolArray:
    """Cells c of the line integrals of R(t_a, .) touching s = 0 or s = t_a."""
    a = np.arange(m + 1)[:, None]
    c = np.arange(m)[None, :]
    return (c == 0) | (a == c) | (a == c + 1)


def _singular_square_cells(m: int) -> BoolArray:
    """Lower-triangle cells touching an axis or the diagonal."""
    row = np.arange(m)[:, None]
    col = np.arange(m)[None, :]
    return (row >= col) & ((col == 0) | (row - col <= 1))


def _line_cells(
    model: CovarianceModel,
    theta: float,
    t: FloatArray,
    a_idx: IntArray,
    c_idx: IntArray,
    tol: Tolerance,
) -> FloatArray:
    diag = 2 * model.hurst_eff
    anchor = t[a_idx]
    top = t[c_idx + 1]
    batch = integrate_batch(
        lambda s, owner: model.cov(anchor[owner], s) * np.exp(-theta * (top[owner] - s)),
        t[c_idx],
        top,
        lower_exponent=diag,
        upper_exponent=diag,
        **tol.kwargs(),
    )
    batch.raise_on_failure("segment pairing line cells")
    return batch.values


def _square_cells(
    model: CovarianceModel,
    theta: float,
    t: FloatArray,
    k_idx: IntArray,
    l_idx: IntArray,
    tol: Tolerance,
) -> FloatArray:
    """int_(cell k) int_(cell l) e^(-theta(t_(k+1) - r)) e^(-theta(t_(l+1) - s)) R(r, s)."""
    diag = 2 * model.hurst_eff
    inner_tol = tol.tighter()
    r_top = t[k_idx + 1]
    s_lo, s_top = t[l_idx], t[l_idx + 1]

    def outer(r: FloatArray, owner: IntArray) -> FloatArray:
        shape = np.broadcast_shapes(r.shape, owner.shape)
        flat_r = np.broadcast_to(r, shape).ravel()
        flat_o = np.broadcast_to(owner, shape).ravel()
        lo, top = s_lo[flat_o], s_top[flat_o]
        batch = integrate_batch(
            lambda s, j: model.cov(flat_r[j], s) * np.exp(-theta * (top[j] - s)),
            lo,
            top,
            kinks=flat_r,
            lower_exponent=diag,
            upper_exponent=diag,
            kink_exponent=diag,
            **inner_tol.kwargs(),
        )
        batch.raise_on_failure("segment pairing inner integral")
        weight = np.exp(-theta * (r_top[flat_o] - flat_r))
        return (batch.values * weight).reshape(shape)

    batch = integrate_batch(
        outer,
        t[k_idx],
        r_top,
        lower_exponent=diag,
        upper_exponent=diag,
        **tol.kwargs(),
    )
    batch.raise_on_failure("segment pairing cells")
    return batch.values


def _norm_result(label: str, levels: list[int], squares: list[float]) -> NormResult:
    ext = richardson(squares)
    square = max(ext.value, 0.0)
    norm = math.sqrt(square)
    error = ext.error / (2 * norm) if norm > 0 else math.sqrt(ext.error)
    logger.debug("%s: squares=%s -> %.8g (order %s)", label, squares, norm, ext.order)
    return NormResult(norm, error, tuple(levels), tuple(squares), ext.order)


def _segment_norm(
    label: str,
    square_at: Callable[[FloatArray, GridSpec], float],
    model: CovarianceModel,
    theta: float,
    T: float,
    rtol: float,
    cells_per_unit: float,
    max_cells: int,
    tol: Tolerance | None,
) -> NormResult:
    coarse = max(MIN_CELLS, math.ceil(T * cells_per_unit))
    finest = 4 * coarse
    if finest > max_cells:
        raise ComplexityError(f"{label} at T={T:g} needs {finest} cells, budget is {max_cells}")
    while True:
        pairings = segment_pairings(model, theta, GridSpec(T, finest), tol)
        levels: list[int] = []
        squares: list[float] = []
        n = coarse
        while n <= finest:
            stride = finest // n
            levels.append(n)
            squares.append(square_at(pairings[::stride, ::stride], GridSpec(T, n)))
            n *= 2
        result = _norm_result(label, levels, squares)
        if result.within(rtol):
            return result
        if 2 * finest > max_cells:
            raise AccuracyError(
                f"{label} did not reach rtol={rtol:g} within {finest} cells",
                estimate=result.value,
                error_bound=result.error,
            )
        finest *= 2


def kernel_norm_h(
    kernel: Kernel2D,
    model: CovarianceModel,
    rtol: float = NORM_RTOL,
    cells_per_unit: float = CELLS_PER_UNIT,
    max_cells: int = MAX_NORM_CELLS,
    tol: Tolerance | None = None,
) -> NormResult:
    """||kernel||_(h x h) through the OU segment decomposition of the kernel.

    With kernel = int chi_w x chi_w kappa(dw) the squared norm is the 4-fold integral

        int int <chi_w, chi_z>_h^2 kappa(dw) kappa(dz)

    evaluated as d' (P o P) d with P from segment_pairings and d the trapezoid weights of
    kappa. Levels double until the Richardson correction meets rtol.

    Raises:
        ComplexityError: If the three coarsest levels already exceed max_cells
        AccuracyError: If the finest allowed level still misses rtol, or a cell integral
            does not converge
    """

    def square_at(pairings: FloatArray, grid: GridSpec) -> float:
        d = kernel.segment_weights(grid)
        return float(d @ (pairings * pairings) @ d)

    return _segment_norm(
        f"||{kernel.label}||",
        square_at,
        model,
        kernel.theta,
        kernel.T,
        rtol,
        cells_per_unit,
        max_cells,
        tol,
    )


def contraction1(
    kernel_a: Kernel2D,
    kernel_b: Kernel2D,
    model: CovarianceModel,
    rtol: float = NORM_RTOL,
    cells_per_unit: float = CELLS_PER_UNIT,
    max_cells: int = MAX_CONTRACTION_CELLS,
    tol: Tolerance | None = None,
) -> NormResult:
    """||a (x)_1 b||_(h x h), the norm of the first contraction.

    (chi_w x chi_w) (x)_1 (chi_z x chi_z) = <chi_w, chi_z>_h chi_w x chi_z, so with the
    segment weights d_a, d_b and P from segment_pairings

        ||a (x)_1 b||^2 = trace(D_a P D_b P D_b P D_a P)

    Raises:
        ValueError: If the kernels differ in T or theta
        ComplexityError: If the three coarsest levels already exceed max_cells
        AccuracyError: If the finest allowed level still misses rtol
    """
    if kernel_a.T != kernel_b.T:
        raise ValueError(f"Kernels on different horizons: {kernel_a.T} != {kernel_b.T}")
    if kernel_a.theta != kernel_b.theta:
        raise ValueError(f"Kernels with different theta: {kernel_a.theta} != {kernel_b.theta}")

    def square_at(pairings: FloatArray, grid: GridSpec) -> float:
        da = kernel_a.segment_weights(grid)[:, None] * pairings
        db = kernel_b.segment_weights(grid)[:, None] * pairings
        left = da @ db
        right = db @ da
        return float(np.sum(left * right.T))

    return _segment_norm(
        f"||{kernel_a.label} x1 {kernel_b.label}||",
        square_at,
        model,
        kernel_a.theta,
        kernel_a.T,
        rtol,
        cells_per_unit,
        max_cells,
        tol,
    )


def _extrapolated_norm(
    label: str,
    square_at: Callable[[GridSpec], float],
    T: float,
    rtol: float,
    cells_per_unit: float,
    max_cells: int,
) -> NormResult:
    cells = max(MIN_CELLS, math.ceil(T * cells_per_unit))
    levels: list[int] = []
    squares: list[float] = []
    while len(levels) < 3 or cells <= max_cells:
        levels.append(cells)
        squares.append(square_at(GridSpec(T, cells)))
        cells *= 2
        if len(levels) >= 3:
            ext = richardson(squares)
            if ext.error <= max(rtol * abs(ext.value), 1e-300):
                break

    result = _norm_result(label, levels, squares)
    if not result.within(rtol):
        raise AccuracyError(
            f"{label} did not reach rtol={rtol:g} within {levels[-1]} cells",
            estimate=result.value,
            error_bound=result.error,
        )
    return result


def kernel_norm_h_gram(
    kernel: Kernel2D,
    model: CovarianceModel,
    rtol: float = NORM_RTOL,
    cells_per_unit: float = CELLS_PER_UNIT,
    max_cells: int = MAX_NORM_CELLS,
) -> NormResult:
    """||kernel||_(h x h) on the increment measure, extrapolated in the cell width.

    At m cells the kernel is replaced by its midpoint values K and
    ||K||^2 = trace(K C K C) with C the increment Gram on the m-cell grid.
    Independent of kernel_norm_h; kept to cross-check it.

    Raises:
        AccuracyError: If the finest allowed level still misses rtol
    """

    def square_at(grid: GridSpec) -> float:
        c = increment_covariance(model, grid)
        kc = kernel.matrix(grid) @ c
        return float(np.sum(kc * kc.T))

    return _extrapolated_norm(
        f"||{kernel.label}||", square_at, kernel.T, rtol, cells_per_unit, max_cells
    )


def contraction1_gram(
    kernel_a: Kernel2D,
    kernel_b: Kernel2D,
    model: CovarianceModel,
    rtol: float = NORM_RTOL,
    cells_per_unit: float = CELLS_PER_UNIT,
    max_cells: int = MAX_CONTRACTION_CELLS,
) -> NormResult:
    """contraction1 on the increment Gram: midpoint values M = A C B, norm trace(M C M^T C).

    Raises:
        ComplexityError: If the three coarsest levels already exceed max_cells
        AccuracyError: If the finest allowed level still misses rtol
    """
    if kernel_a.T != kernel_b.T:
        raise ValueError(f"Kernels on different horizons: {kernel_a.T} != {kernel_b.T}")
    T = kernel_a.T
    finest = 4 * max(MIN_CELLS, math.ceil(T * cells_per_unit))
    if finest > max_cells:
        raise ComplexityError(
            f"contraction at T={T:g} needs {finest} cells, budget is {max_cells}"
        )

    def square_at(grid: GridSpec) -> float:
        c = increment_covariance(model, grid)
        m = kernel_a.matrix(grid) @ c @ kernel_b.matrix(grid)
        return float(np.sum((m @ c) * (c @ m)))

    return _extrapolated_norm(
        f"||{kernel_a.label} x1 {kernel_b.label}||", square_at, T, rtol, cells_per_unit, max_cells
    )
