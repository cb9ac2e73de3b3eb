"""Covariance families of the driving Gaussian noise.

Every family is expressed through closed forms: the covariance R(t,s), its first
partial derivative in t, the mixed second derivative, and the remainder

    Psi(t,s) = d2R/dtds - c * a(2a-1)|t-s|^(2a-2)

left after removing the fractional Brownian principal part at the effective Hurst
exponent a (c is the principal coefficient, 1 except for bi-fBm).
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
import numpy.typing as npt

from gfou.domain.entities import GridSpec
from gfou.domain.exceptions import InvalidModelError, SingularityError

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
Real = float | FloatArray

# Entries of |Psi|(ts)^(1-a) above this are counted as exploding.
EXPLODING_RATIO = 1e8


class Family(Enum):
    """Covariance families."""

    FBM = "fbm"
    SUBFBM = "subfbm"
    BIFBM = "bifbm"
    GENSUBFBM = "gensubfbm"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class MixtureComponent:
    """One independent component of a mixed noise, entering as weight * G."""

    weight: float
    model: "CovarianceModel"


@dataclass(frozen=True)
class CovarianceModel:
    """A tagged covariance family with its parameters.

    The process is sigma * G where G has the family's unit covariance, so every
    quantity below carries a sigma**2 factor.
    """

    family: Family
    hurst: float = 0.5  # H; unused for mixtures
    k: float | None = None  # K for bi-fBm and generalized sub-fBm
    components: tuple[MixtureComponent, ...] = ()
    sigma: float = 1.0

    def __post_init__(self) -> None:
        """Validate family parameters."""
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise InvalidModelError(f"Invalid sigma: {self.sigma}")

        if self.family is Family.MIXTURE:
            if not self.components:
                raise InvalidModelError("Mixture needs at least one component")
            exponents = [c.model.hurst_eff for c in self.components]
            if max(exponents) - min(exponents) > 1e-12:
                raise InvalidModelError(
                    f"Mixture components must share hurst_eff, got {exponents}"
                )
            for component in self.components:
                if not np.isfinite(component.weight) or component.weight == 0:
                    raise InvalidModelError(f"Invalid mixture weight: {component.weight}")
            return

        if self.components:
            raise InvalidModelError(f"{self.family.value} takes no components")
        if not 0.0 < self.hurst < 1.0:
            raise InvalidModelError(f"H must lie in (0,1), got {self.hurst}")

        if self.family in (Family.FBM, Family.SUBFBM):
            if self.k is not None:
                raise InvalidModelError(f"{self.family.value} takes no K parameter")
        elif self.family is Family.BIFBM:
            if self.k is None or not 0.0 < self.k < 1.0:
                raise InvalidModelError(f"bi-fBm needs K in (0,1), got {self.k}")
        elif self.family is Family.GENSUBFBM:
            if self.k is None or not 1.0 <= self.k < 2.0:
                raise InvalidModelError(f"generalized sub-fBm needs K in [1,2), got {self.k}")
            if not 0.0 < self.hurst * self.k < 1.0:
                raise InvalidModelError(f"HK must lie in (0,1), got {self.hurst * self.k}")

    # Constructors

    @classmethod
    def fbm(cls, hurst: float, sigma: float = 1.0) -> "CovarianceModel":
        """Fractional Brownian motion."""
        return cls(Family.FBM, hurst=hurst, sigma=sigma)

    @classmethod
    def subfbm(cls, hurst: float, sigma: float = 1.0) -> "CovarianceModel":
        """Sub-fractional Brownian motion."""
        return cls(Family.SUBFBM, hurst=hurst, sigma=sigma)

    @classmethod
    def bifbm(cls, hurst: float, k: float, sigma: float = 1.0) -> "CovarianceModel":
        """Bifractional Brownian motion."""
        return cls(Family.BIFBM, hurst=hurst, k=k, sigma=sigma)

    @classmethod
    def gensubfbm(cls, hurst: float, k: float, sigma: float = 1.0) -> "CovarianceModel":
        """Generalized sub-fractional Brownian motion."""
        return cls(Family.GENSUBFBM, hurst=hurst, k=k, sigma=sigma)

    @classmethod
    def mixture(
        cls, components: list[tuple[float, "CovarianceModel"]], sigma: float = 1.0
    ) -> "CovarianceModel":
        """Linear combination of independent processes sum w_i G_i."""
        return cls(
            Family.MIXTURE,
            components=tuple(MixtureComponent(w, m) for w, m in components),
            sigma=sigma,
        )

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CovarianceModel":
        """Parse a JSON model description.

        Args:
            data: e.g. {"family": "subfbm", "H": 0.3} or
                {"family": "mixture", "components": [{"weight": 0.5, "family": ...}]}

        Returns:
            CovarianceModel: Parsed model

        Raises:
            InvalidModelError: If the description is malformed or out of domain
        """
        try:
            family = Family(str(data["family"]).lower())
        except (KeyError, ValueError) as e:
            raise InvalidModelError(f"Unknown or missing family in {data!r}") from e

        sigma = float(data.get("sigma", 1.0))
        if family is Family.MIXTURE:
            raw = data.get("components")
            if not isinstance(raw, list):
                raise InvalidModelError("Mixture needs a 'components' list")
            parsed: list[tuple[float, CovarianceModel]] = []
            for item in raw:
                if not isinstance(item, dict) or "weight" not in item:
                    raise InvalidModelError(f"Mixture component needs a weight: {item!r}")
                inner = {key: value for key, value in item.items() if key != "weight"}
                parsed.append((float(item["weight"]), cls.from_dict(inner)))
            return cls.mixture(parsed, sigma=sigma)

        if "H" not in data:
            raise InvalidModelError(f"Missing H in {data!r}")
        k = data.get("K")
        return cls(
            family,
            hurst=float(data["H"]),
            k=None if k is None else float(k),
            sigma=sigma,
        )

    def to_dict(self) -> dict[str, Any]:
        """Inverse of from_dict."""
        if self.family is Family.MIXTURE:
            result: dict[str, Any] = {
                "family": self.family.value,
                "components": [
                    {"weight": c.weight, **c.model.to_dict()} for c in self.components
                ],
            }
        else:
            result = {"family": self.family.value, "H": self.hurst}
            if self.k is not None:
                result["K"] = self.k
        if self.sigma != 1.0:
            result["sigma"] = self.sigma
        return result

    # Derived scalars

    @property
    def hurst_eff(self) -> float:
        """Effective Hurst exponent (H, or HK for the two-parameter families)."""
        if self.family is Family.MIXTURE:
            return self.components[0].model.hurst_eff
        if self.family in (Family.BIFBM, Family.GENSUBFBM):
            assert self.k is not None
            return self.hurst * self.k
        return self.hurst

    @property
    def principal_scale(self) -> float:
        """Coefficient c of the fBm principal part c * a(2a-1)|t-s|^(2a-2)."""
        var = self.sigma**2
        if self.family is Family.MIXTURE:
            return var * sum(c.weight**2 * c.model.principal_scale for c in self.components)
        if self.family is Family.BIFBM:
            assert self.k is not None
            return var * 2.0 ** (1.0 - self.k)
        return var

    @property
    def descriptor(self) -> str:
        """Short human readable label, used in records."""
        if self.family is Family.MIXTURE:
            inner = "+".join(f"{c.weight:g}*{c.model.descriptor}" for c in self.components)
            label = f"mixture({inner})"
        elif self.k is not None:
            label = f"{self.family.value}(H={self.hurst:g},K={self.k:g})"
        else:
            label = f"{self.family.value}(H={self.hurst:g})"
        if self.sigma != 1.0:
            label += f"*{self.sigma:g}"
        return label

    @property
    def axis_exponent(self) -> float:
        """Exponent e of the leading non-smooth term s^e of R(t, s) near s = 0."""
        if self.family is Family.MIXTURE:
            return min(c.model.axis_exponent for c in self.components)
        return 2 * self.hurst

    def principal_model(self) -> "CovarianceModel":
        """The fBm at hurst_eff whose covariance is the principal part of this one."""
        return CovarianceModel.fbm(self.hurst_eff, sigma=float(np.sqrt(self.principal_scale)))

    # Closed forms

    def cov(self, t: Real, s: Real) -> FloatArray:
        """R(t,s), vectorized over broadcastable t and s."""
        t_arr, s_arr = _broadcast(t, s)
        return self.sigma**2 * self._unit_cov(t_arr, s_arr)

    def dcov_dt(self, t: Real, s: Real) -> FloatArray:
        """dR/dt(t,s); refuses t = 0 and t = s."""
        t_arr, s_arr = _broadcast(t, s)
        if np.any(t_arr <= 0) or np.any(t_arr == s_arr):
            raise SingularityError("dcov_dt is undefined at t = 0 and on the diagonal")
        return self.sigma**2 * self._unit_dcov_dt(t_arr, s_arr)

    def d2cov_dtds(self, t: Real, s: Real) -> FloatArray:
        """d2R/dtds(t,s); refuses the axes and the diagonal."""
        t_arr, s_arr = _broadcast(t, s)
        _require_off_singular(t_arr, s_arr)
        return self.sigma**2 * self._unit_d2cov(t_arr, s_arr)

    def principal(self, t: Real, s: Real) -> FloatArray:
        """Principal part c * a(2a-1)|t-s|^(2a-2)."""
        t_arr, s_arr = _broadcast(t, s)
        _require_off_singular(t_arr, s_arr)
        a = self.hurst_eff
        return self.principal_scale * a * (2 * a - 1) * np.abs(t_arr - s_arr) ** (2 * a - 2)

    def remainder(self, t: Real, s: Real) -> FloatArray:
        """Psi(t,s), evaluated from its own closed form."""
        t_arr, s_arr = _broadcast(t, s)
        _require_off_singular(t_arr, s_arr)
        return self.sigma**2 * self._unit_remainder(t_arr, s_arr)

    def _unit_cov(self, t: FloatArray, s: FloatArray) -> FloatArray:
        h = self.hurst
        if self.family is Family.FBM:
            return 0.5 * (t ** (2 * h) + s ** (2 * h) - np.abs(t - s) ** (2 * h))
        if self.family is Family.SUBFBM:
            return t ** (2 * h) + s ** (2 * h) - 0.5 * (
                (t + s) ** (2 * h) + np.abs(t - s) ** (2 * h)
            )
        if self.family is Family.BIFBM:
            k = self._k
            return 2.0 ** (-k) * ((t ** (2 * h) + s ** (2 * h)) ** k - np.abs(t - s) ** (2 * h * k))
        if self.family is Family.GENSUBFBM:
            k = self._k
            a = h * k
            return (t ** (2 * h) + s ** (2 * h)) ** k - 0.5 * (
                (t + s) ** (2 * a) + np.abs(t - s) ** (2 * a)
            )
        return self._mix(lambda m: m.cov(t, s))

    def _unit_dcov_dt(self, t: FloatArray, s: FloatArray) -> FloatArray:
        h = self.hurst
        d = t - s
        if self.family is Family.FBM:
            return h * (t ** (2 * h - 1) - np.sign(d) * np.abs(d) ** (2 * h - 1))
        if self.family is Family.SUBFBM:
            return (
                2 * h * t ** (2 * h - 1)
                - h * (t + s) ** (2 * h - 1)
                - h * np.sign(d) * np.abs(d) ** (2 * h - 1)
            )
        if self.family is Family.BIFBM:
            k = self._k
            a = h * k
            base = t ** (2 * h) + s ** (2 * h)
            return 2.0 ** (-k) * (
                2 * h * k * base ** (k - 1) * t ** (2 * h - 1)
                - 2 * a * np.sign(d) * np.abs(d) ** (2 * a - 1)
            )
        if self.family is Family.GENSUBFBM:
            k = self._k
            a = h * k
            base = t ** (2 * h) + s ** (2 * h)
            return (
                2 * h * k * base ** (k - 1) * t ** (2 * h - 1)
                - a * (t + s) ** (2 * a - 1)
                - a * np.sign(d) * np.abs(d) ** (2 * a - 1)
            )
        return self._mix(lambda m: m.dcov_dt(t, s))

    def _unit_d2cov(self, t: FloatArray, s: FloatArray) -> FloatArray:
        h = self.hurst
        dist = np.abs(t - s)
        if self.family is Family.FBM:
            return h * (2 * h - 1) * dist ** (2 * h - 2)
        if self.family is Family.SUBFBM:
            return h * (2 * h - 1) * (dist ** (2 * h - 2) - (t + s) ** (2 * h - 2))
        if self.family is Family.BIFBM:
            k = self._k
            a = h * k
            base = t ** (2 * h) + s ** (2 * h)
            return 2.0 ** (-k) * (
                4 * h**2 * k * (k - 1) * base ** (k - 2) * (t * s) ** (2 * h - 1)
                + 2 * a * (2 * a - 1) * dist ** (2 * a - 2)
            )
        if self.family is Family.GENSUBFBM:
            k = self._k
            a = h * k
            base = t ** (2 * h) + s ** (2 * h)
            return (
                4 * h**2 * k * (k - 1) * base ** (k - 2) * (t * s) ** (2 * h - 1)
                - a * (2 * a - 1) * (t + s) ** (2 * a - 2)
                + a * (2 * a - 1) * dist ** (2 * a - 2)
            )
        return self._mix(lambda m: m.d2cov_dtds(t, s))

    def _unit_remainder(self, t: FloatArray, s: FloatArray) -> FloatArray:
        h = self.hurst
        if self.family is Family.FBM:
            return np.zeros(np.broadcast(t, s).shape)
        if self.family is Family.SUBFBM:
            return -h * (2 * h - 1) * (t + s) ** (2 * h - 2)
        if self.family is Family.BIFBM:
            k = self._k
            base = t ** (2 * h) + s ** (2 * h)
            return 2.0 ** (-k) * 4 * h**2 * k * (k - 1) * base ** (k - 2) * (t * s) ** (2 * h - 1)
        if self.family is Family.GENSUBFBM:
            k = self._k
            a = h * k
            base = t ** (2 * h) + s ** (2 * h)
            return (
                4 * h**2 * k * (k - 1) * base ** (k - 2) * (t * s) ** (2 * h - 1)
                - a * (2 * a - 1) * (t + s) ** (2 * a - 2)
            )
        return self._mix(lambda m: m.remainder(t, s))

    @property
    def _k(self) -> float:
        assert self.k is not None
        return self.k

    def _mix(self, term: Callable[["CovarianceModel"], FloatArray]) -> FloatArray:
        total: FloatArray = sum(
            (c.weight**2 * term(c.model) for c in self.components),
            start=np.zeros(()),
        )
        return total


@dataclass(frozen=True)
class HypothesisReport:
    """Grid check of |Psi(t,s)| <= C'(ts)^(a-1)."""

    model: CovarianceModel
    grid: GridSpec
    sup_ratio: float  # max |Psi|(ts)^(1-a) over admissible nodes
    c_prime_estimate: float
    violations: int  # non-finite or exploding entries
    argmax: tuple[float, float] | None  # (t, s) where the sup is attained
    margin: float

    def __post_init__(self) -> None:
        """Validate report values."""
        if self.sup_ratio < 0:
            raise ValueError(f"Invalid sup_ratio: {self.sup_ratio}")
        if self.violations < 0:
            raise ValueError(f"Invalid violations: {self.violations}")

    @property
    def passed(self) -> bool:
        """True when no entry was non-finite or exploding."""
        return self.violations == 0

    def to_dict(self) -> dict[str, Any]:
        """Serialize for JSON output."""
        return {
            "model": self.model.to_dict(),
            "T": self.grid.T,
            "n": self.grid.n,
            "margin": self.margin,
            "sup_ratio": self.sup_ratio,
            "c_prime_estimate": self.c_prime_estimate,
            "violations": self.violations,
            "argmax_t": None if self.argmax is None else self.argmax[0],
            "argmax_s": None if self.argmax is None else self.argmax[1],
        }


def cov(model: CovarianceModel, t: Real, s: Real) -> Real:
    """R(t,s); scalars in, float out."""
    return _unwrap(model.cov(t, s))


def dcov_dt(model: CovarianceModel, t: Real, s: Real) -> Real:
    """dR/dt(t,s)."""
    return _unwrap(model.dcov_dt(t, s))


def d2cov_dtds(model: CovarianceModel, t: Real, s: Real) -> Real:
    """d2R/dtds(t,s)."""
    return _unwrap(model.d2cov_dtds(t, s))


def remainder(model: CovarianceModel, t: Real, s: Real) -> Real:
    """Psi(t,s)."""
    return _unwrap(model.remainder(t, s))


def increment_covariance(model: CovarianceModel, grid: GridSpec) -> FloatArray:
    """C_ij = Cov(dG_i, dG_j) from second differences of R at the grid nodes."""
    t = grid.times
    r = model.cov(t[:, None], t[None, :])
    c = r[1:, 1:] - r[1:, :-1] - r[:-1, 1:] + r[:-1, :-1]
    return 0.5 * (c + c.T)


def finite_difference_d2cov(model: CovarianceModel, t: float, s: float) -> float:
    """Central-difference estimate of d2R/dtds for validation.

    Uses h = min(t, s, |t-s|)/100 and one Richardson step against 2h.
    """
    h = min(t, s, abs(t - s)) / 100.0
    if h <= 0:
        raise SingularityError("finite differences need t, s > 0 and t != s")

    def stencil(step: float) -> float:
        value = (
            model.cov(t + step, s + step)
            - model.cov(t + step, s - step)
            - model.cov(t - step, s + step)
            + model.cov(t - step, s - step)
        )
        return float(value) / (4 * step**2)

    return (4 * stencil(h) - stencil(2 * h)) / 3


def check_hypothesis(
    model: CovarianceModel, grid: GridSpec, margin: float | None = None
) -> HypothesisReport:
    """Empirical C'_H on the grid nodes away from the axes and the diagonal.

    Args:
        model: Covariance model
        grid: Grid whose nodes t_i = i T/n are scanned
        margin: Minimal distance to the axes and the diagonal (defaults to one cell)

    Returns:
        HypothesisReport: sup |Psi|(ts)^(1-a), its location, and the violation count
    """
    effective = grid.dt if margin is None else max(float(margin), grid.dt)
    nodes = grid.times[1:]
    t, s = np.meshgrid(nodes, nodes, indexing="ij")
    tol = 1e-9 * grid.dt
    mask = (t >= effective - tol) & (s >= effective - tol) & (np.abs(t - s) >= effective - tol)

    a = model.hurst_eff
    with np.errstate(all="ignore"):
        psi = model.remainder(t[mask], s[mask])
        ratio = np.abs(psi) * (t[mask] * s[mask]) ** (1 - a)

    finite = np.isfinite(ratio)
    violations = int(np.count_nonzero(~finite) + np.count_nonzero(ratio[finite] > EXPLODING_RATIO))

    if np.any(finite):
        best = int(np.argmax(np.where(finite, ratio, -np.inf)))
        sup_ratio = float(ratio[best])
        argmax = (float(t[mask][best]), float(s[mask][best]))
    else:
        sup_ratio, argmax = 0.0, None

    logger.debug(
        "Hypothesis check %s on T=%g n=%d: sup=%.6g violations=%d",
        model.descriptor,
        grid.T,
        grid.n,
        sup_ratio,
        violations,
    )
    return HypothesisReport(
        model=model,
        grid=grid,
        sup_ratio=sup_ratio,
        c_prime_estimate=sup_ratio,
        violations=violations,
        argmax=argmax,
        margin=effective,
    )


def _broadcast(t: Real, s: Real) -> tuple[FloatArray, FloatArray]:
    t_arr, s_arr = np.broadcast_arrays(
        np.asarray(t, dtype=np.float64), np.asarray(s, dtype=np.float64)
    )
    return t_arr, s_arr


def _require_off_singular(t: FloatArray, s: FloatArray) -> None:
    if np.any(t <= 0) or np.any(s <= 0) or np.any(t == s):
        raise SingularityError("mixed derivative is undefined on the axes and the diagonal")


def _unwrap(value: FloatArray) -> Real:
    return float(value) if value.ndim == 0 else value
