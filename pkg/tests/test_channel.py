"""Gram matrix, eigen-modes and folded-spectrum diagnostics."""

import numpy as np
import pytest
from scipy.integrate import quad

from ftnlim.channel import (build_gram, diagonalize, folded_psd,
                            folded_spectrum_eigs, make_channel,
                            ooi_max_blocklength, symbol_count)
from ftnlim.pulse import autocorrelation, make_rrc, make_sinc


# ---------------------------------------------------------------------------
# symbol budget
# ---------------------------------------------------------------------------

def test_symbol_count_formula():
    assert symbol_count(10.0, 4.0, 1.0, 0.0) == 7
    # exact integer boundary must not be lost to floating point
    assert symbol_count(10.0, 4.0, 0.5, 1.0) == 7
    assert symbol_count(132.0, 8.57, 0.486, 1.0) == 127


def test_symbol_count_validation():
    with pytest.raises(ValueError, match="tau"):
        symbol_count(10.0, 4.0, 0.0, 0.5)
    with pytest.raises(ValueError, match="exceeds the window|exceeds window|Omega >= c"):
        symbol_count(3.0, 4.0, 1.0, 0.5)


# ---------------------------------------------------------------------------
# Gram matrix and modes
# ---------------------------------------------------------------------------

def test_build_gram_is_symmetric_toeplitz(rrc1):
    H = build_gram(rrc1, 0.7, 6)
    np.testing.assert_array_equal(H, H.T)
    for k in range(6):
        d = np.diagonal(H, k)
        np.testing.assert_allclose(d, d[0], rtol=0, atol=0)
        assert d[0] == autocorrelation(rrc1, 0.7, k)
    assert np.all(np.diag(H) == 1.0)


def test_diagonalize_tridiagonal_closed_form():
    # Toeplitz tridiagonal (1 on the diagonal, a off it) has eigenvalues
    # 1 + 2 a cos(k pi / (N+1)), k = 1..N
    N, a = 9, 0.35
    H = np.eye(N) + a * (np.eye(N, k=1) + np.eye(N, k=-1))
    lam, U = diagonalize(H)
    want = np.sort(1.0 + 2.0 * a * np.cos(np.arange(1, N + 1) * np.pi / (N + 1)))[::-1]
    np.testing.assert_allclose(lam, want, rtol=1e-12)
    np.testing.assert_allclose(U.T @ U, np.eye(N), atol=1e-12)
    np.testing.assert_allclose(U @ np.diag(lam) @ U.T, H, atol=1e-12)


def test_diagonalize_orders_descending_and_rejects_indefinite():
    lam, _ = diagonalize(np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert lam[0] >= lam[1]
    with pytest.raises(ValueError, match="positive definite"):
        diagonalize(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_gram_trace_equals_symbol_count(rrc1):
    for N in (5, 24, 60):
        lam, _ = diagonalize(build_gram(rrc1, 0.55, N))
        assert lam.sum() == pytest.approx(N, rel=1e-12)


# ---------------------------------------------------------------------------
# folded spectrum
# ---------------------------------------------------------------------------

def test_folded_psd_sinc_tiles_exactly():
    p = make_sinc(0.5)
    f = np.array([-0.3, 0.1, 0.25, 0.4])
    np.testing.assert_allclose(folded_psd(p, 1.0, f), 1.0, rtol=1e-12)


def test_folded_psd_nyquist_flat_for_wide_rrc():
    # orthogonal-spacing folding of a near-ideal root-raised-cosine is
    # flat at T across the fold band
    p = make_rrc(0.5, 0.5, 30.0)
    f = np.linspace(0.0, 0.5 / p.T, 9)
    np.testing.assert_allclose(folded_psd(p, 1.0, f), p.T, atol=5e-3 * p.T)


def test_folded_spectrum_tracks_gram_eigenvalues():
    p = make_rrc(0.3, 0.5, 12.55)
    N = 64
    lam, _ = diagonalize(build_gram(p, 0.8, N))
    fold = np.sort(folded_spectrum_eigs(p, 0.8, N))[::-1]
    assert fold.mean() == pytest.approx(1.0, abs=2e-2)
    assert np.max(np.abs(np.sort(fold) - np.sort(lam))) < 0.12


# ---------------------------------------------------------------------------
# assembled model
# ---------------------------------------------------------------------------

def test_make_channel_power_identity(rrc1):
    # sum 1/sigma_n^2 = rho (Omega/N) sum lambda_n = rho Omega, since the
    # unit-diagonal Gram has trace N
    ch = make_channel(rrc1, 60.0, 31.6, 0.52)
    assert np.sum(1.0 / ch.sigma_sq) == pytest.approx(31.6 * 60.0, rel=1e-10)
    assert ch.nu == pytest.approx(ch.N / (31.6 * 60.0))
    assert ch.h[0] == 1.0
    assert ch.sigma_sq.size == ch.N


def test_make_channel_mode_ordering(rrc1):
    ch = make_channel(rrc1, 40.0, 10.0, 0.6)
    assert np.all(np.diff(ch.eigenvalues) <= 1e-14)
    assert np.all(np.diff(ch.sigma_sq) >= -1e-14)


def test_make_channel_requires_time_limited_pulse():
    with pytest.raises(ValueError, match="time-limited"):
        make_channel(make_sinc(0.5), 20.0, 10.0, 1.0)


def test_make_channel_band_edge_fallback(rrc1):
    explicit = make_channel(rrc1, 40.0, 10.0, 0.6, W=0.5)
    inferred = make_channel(rrc1, 40.0, 10.0, 0.6)
    np.testing.assert_array_equal(explicit.sigma_sq, inferred.sigma_sq)


# ---------------------------------------------------------------------------
# out-of-interval budget for the ideal pulse
# ---------------------------------------------------------------------------

def _ooi_by_quadrature(N, tau, T_x, W=0.5):
    T = 1.0 / (2.0 * W)
    t_n = (np.arange(N) - (N - 1) / 2.0) * tau * T
    inside = []
    for tn in t_n:
        val, _ = quad(lambda t: 2.0 * W * np.sinc(2.0 * W * (t - tn)) ** 2,
                      -T_x / 2.0, T_x / 2.0, limit=300)
        inside.append(val)
    return 1.0 - float(np.mean(inside))


def test_ooi_max_blocklength_vs_quadrature():
    p = make_sinc(0.5)
    tau, T_x, eps = 1.0, 20.0, 0.02
    N = ooi_max_blocklength(p, tau, T_x, eps)
    assert N >= 1
    assert _ooi_by_quadrature(N, tau, T_x) <= eps
    assert _ooi_by_quadrature(N + 1, tau, T_x) > eps


def test_ooi_max_blocklength_needs_sinc(rrc1):
    with pytest.raises(ValueError, match="sinc"):
        ooi_max_blocklength(rrc1, 1.0, 20.0, 0.01)
