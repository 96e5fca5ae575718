"""Packing-ratio selection and the cosine-series pulse search."""

import numpy as np
import pytest

from ftnlim.channel import symbol_count
from ftnlim.design import (
    FS_REFERENCE_DESIGNS,
    FsDesignSpec,
    optimize_fs_pulse,
    percent_gain,
    reference_design,
    tau_star,
)
from ftnlim.pswf import max_dimensions
from ftnlim.pulse import autocorrelation, oob_energy


class TestTauStar:
    def test_algebraic_form(self):
        for omega, c, eta, beta in [(132.0, 8.57, 4.0, 1.0),
                                    (60.0, 10.52, 3.9, 0.5),
                                    (300.0, 22.5, 4.2, 0.1)]:
            expect = (omega - c) / (omega - eta - 1.0) / (1.0 + beta)
            assert tau_star(omega, c, eta, beta) == pytest.approx(expect)

    def test_fills_the_dimension_budget(self):
        # packing at tau_star lands exactly omega - eta symbols in the window
        omega, c, beta = 132.0, 8.57, 1.0
        n_star, eta = max_dimensions(omega, 1e-4)
        tau = tau_star(omega, c, eta, beta)
        assert symbol_count(omega, c, tau, beta) == n_star

    def test_below_orthogonal_spacing_iff_pulse_exceeds_loss(self):
        tau_0 = 1.0 / 1.5
        assert tau_star(100.0, 9.0, 4.0, 0.5) < tau_0
        assert tau_star(100.0, 5.0, 4.0, 0.5) == pytest.approx(tau_0)

    def test_window_too_small(self):
        with pytest.raises(ValueError, match="window"):
            tau_star(8.0, 8.57, 4.0, 1.0)
        with pytest.raises(ValueError, match="window"):
            tau_star(4.5, 2.0, 4.0, 1.0)


class TestPercentGain:
    def test_orthogonal_reference_is_zero(self, rrc1):
        assert percent_gain(rrc1, 40.0, 100.0, 1e-3, 1.0) == 0.0

    def test_packing_gains_at_high_snr(self, rrc1):
        g = percent_gain(rrc1, 40.0, 1000.0, 1e-3, 0.55)
        assert g > 5.0

    def test_rejects_bad_ratio(self, rrc1):
        for tau in (0.0, -0.3, 1.2):
            with pytest.raises(ValueError, match="packing ratio"):
                percent_gain(rrc1, 40.0, 100.0, 1e-3, tau)


class TestReferenceDesigns:
    @pytest.mark.parametrize("c", sorted(FS_REFERENCE_DESIGNS))
    def test_feasible(self, c):
        p = reference_design(c)
        T, _ = FS_REFERENCE_DESIGNS[c]
        assert autocorrelation(p, 1.0, 0) == pytest.approx(1.0, abs=1e-6)
        assert oob_energy(p, 0.5) <= 1.1e-4
        lags = int(np.floor(c / T))
        peaks = [abs(autocorrelation(p, 1.0, n)) for n in range(1, lags + 1)]
        assert max(peaks) <= 0.101

    def test_unknown_occupancy(self):
        with pytest.raises(KeyError):
            reference_design(5.0)


class TestOptimizer:
    def test_grid_respects_window(self):
        spec = FsDesignSpec(omega=10.0, t_p_values=[4.0, 6.0, 12.0])
        assert spec.t_p_grid().tolist() == [4.0, 6.0]
        with pytest.raises(ValueError, match="support"):
            FsDesignSpec(omega=3.0, t_p_values=[8.0]).t_p_grid()

    def test_small_search_returns_feasible_design(self):
        spec = FsDesignSpec(omega=10.0, t_p_values=[4.0], restarts=2,
                            seed=7, max_iter=60)
        res = optimize_fs_pulse(spec)
        assert res.T_p == 4.0
        assert res.oob <= spec.eps_W + 1e-6
        assert res.max_corr < spec.K_0 + 1e-6
        assert res.c_na > 0.0
        p = res.as_pulse()
        assert autocorrelation(p, 1.0, 0) == pytest.approx(1.0, abs=1e-6)

    def test_deterministic_under_seed(self):
        spec = FsDesignSpec(omega=10.0, t_p_values=[4.0], restarts=1,
                            seed=3, max_iter=40)
        a = optimize_fs_pulse(spec)
        b = optimize_fs_pulse(spec)
        assert a.c_na == b.c_na
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_impossible_constraints_raise(self):
        spec = FsDesignSpec(omega=10.0, t_p_values=[4.0], restarts=1,
                            seed=0, max_iter=30, eps_W=1e-12, K_0=1e-6)
        with pytest.raises(ValueError, match="infeasible"):
            optimize_fs_pulse(spec)
