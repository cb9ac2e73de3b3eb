"""Unit tests for the auxiliary integrals and the oracle sweep."""

import numpy as np
import pytest
from scipy import special

from gfou.domain import appendix
from gfou.domain.appendix import (
    ALL_ITEMS,
    A_bar_funcs,
    LemmaSweepConfig,
    lemma_sweep,
    phi,
    phi_limit,
    psi,
)
from gfou.domain.entities import OracleReport, OracleStatus
from gfou.domain.exceptions import AccuracyError, DomainError


def _psi_closed_form(w: float, T: float, H: float) -> float:
    left = np.exp(-w) * w**H / H * special.hyp1f1(H, H + 1, w)
    right = np.exp(w) * special.gamma(H) * (special.gammainc(H, T) - special.gammainc(H, w))
    return float(left + right)


class TestAuxiliaryIntegrals:
    """Tests for A, Abar, psi and phi."""

    def test_a_closed_form(self) -> None:
        """A and Abar through the incomplete gamma and Kummer functions."""
        beta = 0.3
        s = np.array([0.01, 0.5, 3.0, 30.0])
        a, abar = A_bar_funcs(1.0, beta, s)
        np.testing.assert_allclose(a, special.gamma(beta) * special.gammainc(beta, s), rtol=1e-6)
        expected_bar = np.exp(-s) * s**beta / beta * special.hyp1f1(beta, beta + 1, s)
        np.testing.assert_allclose(abar, expected_bar, rtol=1e-6)

    def test_a_invalid(self) -> None:
        """beta and s are range-checked."""
        with pytest.raises(ValueError, match="Invalid beta"):
            A_bar_funcs(1.0, 0.0, 1.0)
        with pytest.raises(ValueError, match="s must be"):
            A_bar_funcs(1.0, 0.3, -1.0)

    @pytest.mark.parametrize("w", [0.01, 1.0, 7.5, 20.0])
    def test_psi_closed_form(self, w: float) -> None:
        """psi splits into an Abar part and an incomplete gamma tail."""
        assert psi(w, 20.0, 0.3)[0] == pytest.approx(_psi_closed_form(w, 20.0, 0.3), rel=1e-6)

    def test_psi_domain(self) -> None:
        """H must lie in (0, 1/2) and w in [0, T]."""
        with pytest.raises(DomainError):
            psi(1.0, 10.0, 0.6)
        with pytest.raises(ValueError, match="w must lie"):
            psi(11.0, 10.0, 0.3)

    def test_phi_positive(self) -> None:
        """phi is a positive integral, finite at the kink v = w."""
        values = phi([0.5, 2.0, 5.0], 5.0, 0.3)
        assert np.all(values > 0)
        assert np.all(np.isfinite(values))

    def test_phi_domain(self) -> None:
        """v = 0 is excluded."""
        with pytest.raises(ValueError, match="v must lie"):
            phi(0.0, 5.0, 0.3)

    def test_phi_limit(self) -> None:
        """2 (B(2H, H) H - 1)."""
        assert phi_limit(0.3) == pytest.approx(2 * (special.beta(0.6, 0.3) * 0.3 - 1))
        assert phi_limit(0.3) > 0


class TestLemmaSweepConfig:
    """Tests for the sweep configuration."""

    def test_from_dict(self) -> None:
        """Lists become tuples and unset keys keep defaults."""
        cfg = LemmaSweepConfig.from_dict({"H": 0.2, "items": ["A_bound"], "psi_T": [5, 10, 20]})
        assert cfg.items == ("A_bound",)
        assert cfg.psi_T == (5, 10, 20)
        assert cfg.beta == 0.3
        assert LemmaSweepConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key(self) -> None:
        """Typos are rejected."""
        with pytest.raises(ValueError, match="Unknown lemma sweep keys"):
            LemmaSweepConfig.from_dict({"hurst": 0.3})

    def test_unknown_item(self) -> None:
        """Items must be known checks."""
        with pytest.raises(ValueError, match="Unknown sweep items"):
            LemmaSweepConfig(items=("A_bound", "nope"))

    def test_tolerance(self) -> None:
        """Quadrature settings travel as a Tolerance."""
        tol = LemmaSweepConfig(rtol=1e-5, max_depth=12).tolerance
        assert tol.rtol == 1e-5
        assert tol.max_depth == 12


class TestLemmaSweep:
    """Tests for the oracle sweep."""

    def test_empty(self) -> None:
        """No items, no reports."""
        assert lemma_sweep(LemmaSweepConfig(items=())) == []

    def test_bounds_pass(self) -> None:
        """The A, Abar and psi bounds hold on the default grids."""
        reports = lemma_sweep(LemmaSweepConfig(items=("A_bound", "Abar_bound", "psi_bound")))
        assert [r.name for r in reports] == ["A_bound", "Abar_bound", "psi_bound"]
        assert all(r.passed for r in reports), [r.to_dict() for r in reports]

    def test_psi_monotone_and_rate(self) -> None:
        """psi(1, T) grows in T and psi(T, T) decays like T^(H-1)."""
        reports = lemma_sweep(LemmaSweepConfig(items=("psi_monotone", "psi_rate")))
        assert reports[0].status is OracleStatus.PASS
        assert reports[1].status is OracleStatus.PASS
        assert reports[1].slope == pytest.approx(-0.7, abs=0.1)

    def test_out_of_range_is_skipped(self) -> None:
        """H = 0.45 has no Berry-Esseen rate, so the contraction item is skipped."""
        (report,) = lemma_sweep(LemmaSweepConfig(H=0.45, items=("contraction_decay",)))
        assert report.status is OracleStatus.SKIPPED
        assert "DomainError" in report.detail
        assert not report.passed

    def test_numerical_failure_is_error(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """A failing quadrature becomes an ERROR item without aborting the batch."""

        def broken(_cfg: LemmaSweepConfig) -> OracleReport:
            raise AccuracyError("no convergence", estimate=1.0, error_bound=0.5)

        monkeypatch.setitem(appendix._CHECKS, "A_bound", broken)
        reports = lemma_sweep(LemmaSweepConfig(items=("A_bound", "psi_monotone")))
        assert reports[0].status is OracleStatus.ERROR
        assert "AccuracyError" in reports[0].detail
        assert reports[1].status is OracleStatus.PASS

    def test_invalid_argument_is_error(self) -> None:
        """A psi_w beyond the T grid is reported as ERROR, the rest still runs."""
        reports = lemma_sweep(LemmaSweepConfig(items=("psi_monotone", "A_bound"), psi_w=20.0))
        assert reports[0].status is OracleStatus.ERROR
        assert "ValueError" in reports[0].detail
        assert reports[1].status is OracleStatus.PASS

    def test_workers_keep_order(self) -> None:
        """Parallel runs report in config order."""
        items = ("psi_bound", "A_bound", "Abar_bound")
        reports = lemma_sweep(LemmaSweepConfig(items=items, workers=3))
        assert tuple(r.name for r in reports) == items

    def test_report_dict(self) -> None:
        """Reports serialize with their status."""
        (report,) = lemma_sweep(LemmaSweepConfig(items=("A_bound",)))
        data = report.to_dict()
        assert data["status"] == "pass"
        assert data["pass"] is True
        assert len(data["grid"]) == len(data["values"])

    @pytest.mark.slow
    def test_default_sweep(self) -> None:
        """The full default sweep evaluates every item without numerical errors."""
        reports = lemma_sweep(LemmaSweepConfig(workers=4))
        assert [r.name for r in reports] == list(ALL_ITEMS)
        assert not [r.to_dict() for r in reports if r.status is OracleStatus.ERROR]
