"""Discrete-time FTN channel: Gram matrix, eigen-modes, folded spectrum.

Packing N symbols at spacing tau*T into a window of time-bandwidth
product Omega = 2 W T_x turns the matched-filter outputs into
y = sqrt(rho Omega / N) H x + z with z ~ N(0, H), where H is the
Toeplitz Gram matrix of the pulse autocorrelation h_n.  Diagonalizing
H = U diag(lambda) U^T gives independent modes with noise levels
sigma_n^2 = (rho (Omega/N) lambda_n)^{-1}; the trace identity
sum lambda_n = N holds because h_0 = 1.

The folded pulse spectrum sum_k |p_hat(f - k/(tau T))|^2 sampled at
f_n = n/(N tau T) approximates the Gram eigenvalues for large N and is
kept as a diagnostic (it degrades at small time-bandwidth products).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh, toeplitz
from scipy.special import sici

from .pulse import Pulse, autocorrelation_sequence, transform


@dataclass
class ChannelModel:
    """Diagonalized FTN transmission model."""

    omega: float
    N: int
    rho: float
    tau: float
    sigma_sq: np.ndarray                    # per-mode noise levels, length N
    eigenvalues: Optional[np.ndarray] = None
    modes: Optional[np.ndarray] = None      # columns = eigenvectors of H
    pulse: Optional[Pulse] = None
    h: Optional[np.ndarray] = None          # first Gram row h_0 ... h_{N-1}
    W: Optional[float] = None

    @property
    def nu(self) -> float:
        """Noise variance N/(rho Omega) of the normalized symbol model."""
        return self.N / (self.rho * self.omega)


def symbol_count(omega: float, c: float, tau: float, beta: float) -> int:
    """N = floor((Omega - c) / (tau (1 + beta)) + 1), the number of
    pulses at spacing tau*T that fit in the signaling window."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if omega < c:
        raise ValueError("pulse exceeds window: need Omega >= c")
    n = int(np.floor((omega - c) / (tau * (1.0 + beta)) + 1.0 + 1e-9))
    if n < 1:
        raise ValueError("window admits no symbols")
    return n


def _effective_c_beta(p: Pulse, W: float):
    return 2.0 * W * p.T_p, 2.0 * W * p.T - 1.0


def build_gram(p: Pulse, tau: float, N: int) -> np.ndarray:
    """Symmetric Toeplitz Gram matrix of pulse shifts at spacing tau*T."""
    if N < 1:
        raise ValueError("N must be >= 1")
    h = autocorrelation_sequence(p, tau, N - 1)
    return toeplitz(h)


def diagonalize(H: np.ndarray):
    """Eigen-decomposition H = U diag(lam) U^T, lam descending.

    Raises if H is materially non-PSD; rounding-level negatives from
    near-null modes are floored at 1e-30.
    """
    H = np.asarray(H, dtype=float)
    lam, U = eigh(H)
    if lam[-1] > 0 and lam[0] < -1e-8 * lam[-1]:
        raise ValueError("not positive definite: min eigenvalue %.3e" % lam[0])
    order = np.argsort(lam)[::-1]
    lam = np.maximum(lam[order], 1e-30)
    return lam, U[:, order]


def folded_psd(p: Pulse, tau: float, f, T: Optional[float] = None) -> np.ndarray:
    """Folded squared spectrum sum_k |p_hat(f - k/(tau T))|^2.

    The shift sum grows until the outermost band holds no spectral mass
    above 1e-8 (amplitude), capped at 128 shifts for pulses whose hard
    truncation leaves a slowly decaying tail.
    """
    f = np.atleast_1d(np.asarray(f, dtype=float))
    if T is None:
        T = p.T
    step = 1.0 / (tau * T)
    out = transform(p, f) ** 2
    for k in range(1, 129):
        hi = transform(p, f - k * step)
        lo = transform(p, f + k * step)
        out = out + hi ** 2 + lo ** 2
        if max(np.max(np.abs(hi)), np.max(np.abs(lo))) < 1e-8:
            break
    return out


def folded_spectrum_eigs(p: Pulse, tau: float, N: int) -> np.ndarray:
    """Approximate Gram eigenvalues (1/(tau T)) fold(f_n), f_n = n/(N tau T).

    Diagnostic only: the approximation loosens at small N.
    """
    f = np.arange(N) / (N * tau * p.T)
    return folded_psd(p, tau, f) / (tau * p.T)


def make_channel(p: Pulse, omega: float, rho: float, tau: float,
                 W: Optional[float] = None) -> ChannelModel:
    """Assemble the diagonalized model for pulse p in a window of
    time-bandwidth product omega at SNR rho (linear)."""
    if W is None:
        W = p.W
    if W is None:
        raise ValueError("band edge W not set on the pulse; pass it explicitly")
    if p.T_p is None:
        raise ValueError("make_channel needs a time-limited pulse")
    c, beta = _effective_c_beta(p, W)
    N = symbol_count(omega, c, tau, beta)
    H = build_gram(p, tau, N)
    lam, U = diagonalize(H)
    sigma_sq = 1.0 / (rho * (omega / N) * lam)
    return ChannelModel(omega=float(omega), N=N, rho=float(rho), tau=float(tau),
                        sigma_sq=sigma_sq, eigenvalues=lam, modes=U, pulse=p,
                        h=H[0].copy(), W=float(W))


def _sinc_sq_integral(z):
    """Antiderivative of sinc^2: Si(2 pi z)/pi - sin^2(pi z)/(pi^2 z)."""
    z = np.asarray(z, dtype=float)
    si, _ = sici(2.0 * np.pi * z)
    out = si / np.pi
    nz = np.abs(z) > 1e-12
    out = np.where(nz, out - np.sin(np.pi * z) ** 2 / (np.pi ** 2 * np.where(nz, z, 1.0)), out)
    return out


def ooi_max_blocklength(p: Pulse, tau: float, T_x: float, eps_T: float) -> int:
    """Largest N for which a centered block of N sinc pulses at spacing
    tau*T keeps its average out-of-interval energy within eps_T."""
    if p.kind != "sinc":
        raise ValueError("out-of-interval accounting applies to the sinc pulse")
    two_w = 2.0 * p.W
    best = 0
    for N in range(1, 10 ** 7):
        t_n = (np.arange(N) - (N - 1) / 2.0) * tau * p.T
        inside = _sinc_sq_integral(two_w * (T_x / 2.0 - t_n)) \
            - _sinc_sq_integral(two_w * (-T_x / 2.0 - t_n))
        ooi = 1.0 - float(np.mean(inside))
        if ooi > eps_T:
            return best
        best = N
    raise ValueError("block length search did not terminate")
