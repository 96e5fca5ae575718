"""Rate bounds: CGF machinery, saddlepoint tails, NA/MC/RCU layers."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import ncx2

from ftnlim.bounds import (capacity_ftn, cgf, mc_rate, moments_mismatched,
                           na_bler, na_rate, rcu_bler, rcu_rate,
                           saddlepoint_log_cdf)
from ftnlim.channel import ChannelModel, make_channel
from ftnlim.pulse import make_rrc, make_sinc


def _flat_channel(N, s, omega):
    return ChannelModel(omega=float(omega), N=N, rho=np.nan, tau=np.nan,
                        sigma_sq=np.full(N, float(s)))


# ---------------------------------------------------------------------------
# cumulant generating function
# ---------------------------------------------------------------------------

def test_cgf_derivatives_match_finite_differences():
    rng = np.random.default_rng(31)
    for _ in range(5):
        n = rng.integers(1, 7)
        sigma_sq = rng.uniform(0.3, 3.0, n)
        xi = rng.uniform(0.0, 2.0, n)
        t = rng.uniform(-2.0, 0.9 * sigma_sq.min())
        h = 1e-6
        ev = cgf(t, sigma_sq, xi)
        up = cgf(t + h, sigma_sq, xi).value
        dn = cgf(t - h, sigma_sq, xi).value
        assert ev.d1 == pytest.approx((up - dn) / (2 * h), rel=1e-5)
        assert ev.d2 == pytest.approx((up - 2 * ev.value + dn) / h ** 2, rel=1e-3)


def test_cgf_zero_is_zero_and_mean():
    sigma_sq = np.array([0.5, 1.5])
    xi = np.array([0.2, 1.0])
    ev = cgf(0.0, sigma_sq, xi)
    assert ev.value == pytest.approx(0.0, abs=1e-15)
    assert ev.d1 == pytest.approx(np.sum((1 + xi) / sigma_sq))


def test_cgf_domain_checks():
    with pytest.raises(ValueError, match="domain"):
        cgf(0.6, np.array([0.5, 2.0]), np.zeros(2))
    with pytest.raises(ValueError, match="positive"):
        cgf(0.0, np.array([-1.0]), np.zeros(1))


# ---------------------------------------------------------------------------
# saddlepoint lower tail
# ---------------------------------------------------------------------------

def test_saddlepoint_vs_exponential_closed_form():
    # single mode, zero noncentrality: Y ~ Exp(sigma_sq), so
    # ln P[Y <= a] = ln(1 - exp(-a sigma_sq)) exactly
    s = 0.7
    mean = 1.0 / s
    for frac in (0.15, 0.4, 0.7, 0.95):
        a = frac * mean
        exact = np.log1p(-np.exp(-a * s))
        got = saddlepoint_log_cdf(np.array([s]), np.array([0.0]), a)
        assert got == pytest.approx(exact, abs=0.06)


def _exact_log_cdf_two_modes(sigma_sq, xi, a):
    """ln P[U1/s1 + U2/s2 <= a] by conditioning on the first mode;
    U_i = 0.5 Q_i with Q_i ~ ncx2(2, 2 xi_i)."""
    s1, s2 = sigma_sq
    x1, x2 = xi

    def integrand(q1):
        rest = (a - q1 / (2.0 * s1)) * 2.0 * s2
        return ncx2.pdf(q1, 2, 2.0 * x1) * ncx2.cdf(rest, 2, 2.0 * x2)

    hi = 2.0 * s1 * a
    val, _ = quad(integrand, 0.0, hi, limit=400)
    return np.log(val)


def test_saddlepoint_vs_exact_quadrature_two_modes():
    rng = np.random.default_rng(77)
    for _ in range(8):
        sigma_sq = rng.uniform(0.3, 2.5, 2)
        xi = rng.uniform(0.0, 2.0, 2)
        mean = np.sum((1 + xi) / sigma_sq)
        a = rng.uniform(0.2, 0.9) * mean
        exact = _exact_log_cdf_two_modes(sigma_sq, xi, a)
        got = saddlepoint_log_cdf(sigma_sq, xi, a)
        assert got == pytest.approx(exact, abs=0.07), \
            "sigma_sq=%s xi=%s a=%.3f" % (sigma_sq, xi, a)


def test_saddlepoint_at_mean_is_half():
    sigma_sq = np.array([0.8, 1.2, 2.0])
    xi = np.array([0.5, 0.1, 1.3])
    a = float(np.sum((1 + xi) / sigma_sq))
    assert saddlepoint_log_cdf(sigma_sq, xi, a) == pytest.approx(np.log(0.5))


def test_saddlepoint_domain_checks():
    s, x = np.array([1.0]), np.array([0.0])
    with pytest.raises(ValueError, match="positive"):
        saddlepoint_log_cdf(s, x, -0.5)
    with pytest.raises(ValueError, match="lower"):
        saddlepoint_log_cdf(s, x, 1.5)


def test_saddlepoint_monotone_in_a():
    sigma_sq = np.array([0.5, 1.0, 1.7])
    xi = np.array([0.3, 0.9, 0.0])
    mean = np.sum((1 + xi) / sigma_sq)
    vals = [saddlepoint_log_cdf(sigma_sq, xi, f * mean)
            for f in (0.2, 0.4, 0.6, 0.8)]
    assert np.all(np.diff(vals) > 0)


# ---------------------------------------------------------------------------
# normal approximation
# ---------------------------------------------------------------------------

def test_na_round_trip(small_channel):
    for pe in (1e-2, 1e-3, 1e-5):
        r = na_rate(small_channel, pe)
        assert na_bler(small_channel, r) == pytest.approx(pe, rel=1e-10)


def test_na_rate_flat_modes_closed_form():
    # equal modes: C and V are N copies of one term, so the rate is
    # writable straight from the Q-inverse
    from scipy.special import ndtri
    N, s, omega, pe = 12, 0.25, 16.0, 1e-3
    ch = _flat_channel(N, s, omega)
    snr = 1.0 / s
    C = N * np.log2(1 + snr) / omega
    V = N * (1 - (1 + snr) ** -2) / omega
    want = C - np.sqrt(V / omega) * np.log2(np.e) * (-ndtri(pe)) \
        + np.log2(omega) / (2 * omega)
    assert na_rate(ch, pe) == pytest.approx(want, rel=1e-12)


def test_na_median_rate_is_mean_term():
    # Qinv(0.5) = 0 removes the dispersion term entirely
    ch = _flat_channel(10, 0.5, 20.0)
    C = 10 * np.log2(3.0) / 20.0
    corr = np.log2(20.0) / 40.0
    assert na_rate(ch, 0.5) == pytest.approx(C + corr, rel=1e-12)
    assert na_bler(ch, C + corr) == pytest.approx(0.5, rel=1e-12)


def test_na_real_valued_halves_the_leading_term():
    ch = _flat_channel(10, 0.5, 20.0)
    corr = np.log2(20.0) / 40.0
    full = na_rate(ch, 0.5) - corr
    half = na_rate(ch, 0.5, real_valued=True) - corr
    assert half == pytest.approx(0.5 * full, rel=1e-12)
    r = na_rate(ch, 1e-3, real_valued=True)
    assert na_bler(ch, r, real_valued=True) == pytest.approx(1e-3, rel=1e-10)


def test_na_bler_monotone_in_rate(small_channel):
    rates = np.linspace(0.5, 3.0, 7)
    blers = [na_bler(small_channel, r) for r in rates]
    assert np.all(np.diff(blers) > 0)


# ---------------------------------------------------------------------------
# meta-converse
# ---------------------------------------------------------------------------

def test_mc_rate_vs_frozen_monte_carlo():
    # brute-force two-stage oracle at N=8 identical modes (sigma_sq=0.5,
    # omega=10, Pe=1e-3), 1e7 draws, seed 555:
    #   lambda = 2.32684, P_lower = 1.31327e-2, rate = 0.62507
    # saddlepoint evaluation should land within its own approximation
    # error of both stages
    ch = _flat_channel(8, 0.5, 10.0)
    r = mc_rate(ch, 1e-3)
    assert r.method == "mc"
    assert r.diagnostics["lambda"] == pytest.approx(2.32684, abs=0.02)
    assert r.rate_bps_hz == pytest.approx(0.62507, abs=0.015)


def test_mc_rate_validates_pe(small_channel):
    with pytest.raises(ValueError, match="Pe"):
        mc_rate(small_channel, 0.7)


def test_mc_rate_monotone_in_pe(small_channel):
    r1 = mc_rate(small_channel, 1e-4).rate_bps_hz
    r2 = mc_rate(small_channel, 1e-2).rate_bps_hz
    assert r1 < r2


# ---------------------------------------------------------------------------
# random-coding union bound
# ---------------------------------------------------------------------------

def test_rcu_bler_deterministic_and_monotone(small_channel):
    a = rcu_bler(small_channel, 1.0, samples=20_000, seed=3)
    b = rcu_bler(small_channel, 1.0, samples=20_000, seed=3)
    assert a.bler == b.bler
    c = rcu_bler(small_channel, 1.4, samples=20_000, seed=3)
    assert c.bler > a.bler
    assert 0.0 < a.bler <= 1.0


def test_rcu_rate_inverts_rcu_bler(small_channel):
    pe = 1e-3
    r = rcu_rate(small_channel, pe, samples=50_000, seed=9)
    at = rcu_bler(small_channel, r.rate_bps_hz, samples=50_000, seed=9).bler
    above = rcu_bler(small_channel, r.rate_bps_hz + 2e-4,
                     samples=50_000, seed=9).bler
    assert at <= pe
    assert above > pe


def test_rcu_zero_rate_note():
    # a hopeless channel: deep noise, tiny window
    ch = _flat_channel(2, 50.0, 2.0)
    r = rcu_rate(ch, 1e-6, samples=2_000, seed=1)
    assert r.rate_bps_hz == 0.0


def test_bound_sandwich_moderate_window(rrc1):
    # achievability <= normal approximation <= converse
    ch = make_channel(rrc1, 60.0, 10.0 ** 1.5, 0.52)
    pe = 1e-3
    lo = rcu_rate(ch, pe, samples=200_000, seed=4).rate_bps_hz
    mid = na_rate(ch, pe)
    hi = mc_rate(ch, pe).rate_bps_hz
    assert lo <= mid <= hi


# ---------------------------------------------------------------------------
# capacity of the folded spectrum
# ---------------------------------------------------------------------------

def test_capacity_sinc_is_awgn():
    p = make_sinc(0.5)
    for rho in (1.0, 10.0, 100.0):
        assert capacity_ftn(p, 1.0, rho) == pytest.approx(np.log2(1 + rho),
                                                          rel=1e-6)


def test_capacity_sinc_saturates_below_nyquist():
    p = make_sinc(0.5)
    c1 = capacity_ftn(p, 1.0, 10.0)
    c2 = capacity_ftn(p, 0.5, 10.0)
    assert c2 == pytest.approx(c1, rel=1e-6)


def test_capacity_rrc_gains_then_saturates():
    p = make_rrc(0.5, 0.5, 30.0)
    tau_0 = 1.0 / 1.5
    at_nyq = capacity_ftn(p, 1.0, 10.0)
    at_tau0 = capacity_ftn(p, tau_0, 10.0)
    tighter = capacity_ftn(p, 0.8 * tau_0, 10.0)
    assert at_tau0 > at_nyq                     # faster-than-Nyquist gain
    assert tighter == pytest.approx(at_tau0, rel=2e-3)  # and then saturation


# ---------------------------------------------------------------------------
# mismatched-density moments
# ---------------------------------------------------------------------------

def test_moments_mismatched_sampling_oracle():
    # i = ln(1+snr) + |y|^2/(1+s) - |y-x|^2/s with unit-magnitude symbols
    # (random phase) and y = x + z; the quoted variance is for exactly
    # this constant-energy input law
    rng = np.random.default_rng(42)
    n = 400_000
    for s in (0.4, 1.5):
        x = np.exp(2j * np.pi * rng.random(n))
        z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(s / 2)
        y = x + z
        i = np.log1p(1 / s) + np.abs(y) ** 2 / (1 + s) - np.abs(y - x) ** 2 / s
        mean, var = moments_mismatched(np.array([s]))
        se_m = np.sqrt(var[0] / n)
        assert i.mean() == pytest.approx(mean[0], abs=4 * se_m)
        assert i.var() == pytest.approx(var[0], rel=0.02)
