"""Prolate spheroidal wave function basis and benchmark rates.

The sinc kernel 2W sinc(2W(t-s)) on [-T_x/2, T_x/2] depends on (W, T_x)
only through the time-bandwidth product Omega = 2 W T_x, so everything
here is solved on the canonical scale W = 1/2, T_x = Omega.  The
integral operator is discretized by Gauss-Legendre Nystrom with the
symmetrized matrix sqrt(w_i) sinc(x_i - x_j) sqrt(w_j), whose trace
equals Omega exactly.

The benchmark rates put the transmit power on the leading prolate
modes -- either uniformly on the largest dimension count whose average
captured-energy deficit stays within eps_W, or by waterfilling against
a per-mode leakage price -- and evaluate the normal-approximation rate
of the resulting parallel channel.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigh


@dataclass
class PswfBasis:
    omega: float
    eigenvalues: np.ndarray       # mu_0 >= mu_1 >= ..., clipped to [1e-300, 1]
    eigenfunctions: np.ndarray    # column j = phi_j at the quadrature nodes
    quad_nodes: np.ndarray
    quad_weights: np.ndarray


def solve_basis(omega: float, num_modes: Optional[int] = None,
                quad_points: Optional[int] = None) -> PswfBasis:
    """Leading eigenpairs of the sinc kernel at time-bandwidth product omega."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if num_modes is None:
        num_modes = int(np.ceil(omega)) + 20
    required = max(int(np.ceil(4 * omega)), 2 * num_modes + 32)
    if quad_points is None:
        quad_points = required
    elif quad_points < required:
        raise ValueError("insufficient quadrature: need >= %d points" % required)

    xi, wts = leggauss(quad_points)
    x = 0.5 * omega * xi
    w = 0.5 * omega * wts
    sw = np.sqrt(w)
    A = sw[:, None] * np.sinc(x[:, None] - x[None, :]) * sw[None, :]
    vals, vecs = eigh(A)
    if abs(vals.sum() - omega) > 1e-6 * omega:
        raise ValueError("insufficient quadrature: trace identity violated")
    order = np.argsort(vals)[::-1][:num_modes]
    mu = np.clip(vals[order], 1e-300, 1.0)
    phi = vecs[:, order] / sw[:, None]
    # deterministic sign: largest-magnitude node value positive
    piv = np.argmax(np.abs(phi), axis=0)
    phi *= np.sign(phi[piv, np.arange(phi.shape[1])])
    return PswfBasis(omega=float(omega), eigenvalues=mu, eigenfunctions=phi,
                     quad_nodes=x, quad_weights=w)


def max_dimensions(omega: float, eps_W: float,
                   basis: Optional[PswfBasis] = None):
    """(N_star, eta): the largest N with (1/N) sum_{n<N} (1 - mu_n) <= eps_W
    and the dimensional loss eta = omega - N_star.

    The per-mode deficit 1 - mu_n is nondecreasing, so the running
    average crosses eps_W exactly once.
    """
    if basis is None:
        basis = solve_basis(omega)
    deficit = 1.0 - basis.eigenvalues
    crit = np.cumsum(deficit) / np.arange(1, deficit.size + 1)
    ok = crit <= eps_W
    if not ok.any():
        return 0, float(omega)
    n_star = int(np.max(np.nonzero(ok)[0])) + 1
    if n_star == deficit.size:
        raise ValueError("mode budget exhausted before the deficit crossed eps_W")
    return n_star, float(omega) - n_star


def _waterfill_allocation(mu: np.ndarray, PT_x: float, eps_W: float,
                          tol: float = 1e-12):
    """Power allocation P_n = max(0, PT_x/(th1 (1-mu_n) + th2) - 1).

    Multipliers (th1, th2) are solved by nested bisection so that the
    total power and leakage constraints hold with equality (th1 = 0 if
    the leakage constraint is slack at the pure waterfilling point).
    Noise level is 1, so P_n is also the per-mode SNR.
    """
    deficit = 1.0 - mu

    def alloc(th1, th2):
        return np.maximum(0.0, PT_x / (th1 * deficit + th2) - 1.0)

    def power_frac(P):
        return np.sum(P) / PT_x

    def leak_frac(P):
        return np.sum(P * deficit) / PT_x

    def solve_th2(th1):
        lo, hi = 1e-14, float(mu.size) * 2.0 + 10.0
        while power_frac(alloc(th1, hi)) > 1.0:
            hi *= 2.0
            if hi > 1e18:
                raise ValueError("no feasible multipliers: power never balances")
        while power_frac(alloc(th1, lo)) < 1.0:
            lo /= 2.0
            if lo < 1e-300:
                raise ValueError("no feasible multipliers: power never balances")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if power_frac(alloc(th1, mid)) > 1.0:
                lo = mid
            else:
                hi = mid
            if hi - lo < tol * max(1.0, hi):
                break
        return 0.5 * (lo + hi)

    th2 = solve_th2(0.0)
    if leak_frac(alloc(0.0, th2)) <= eps_W + 1e-15:
        return alloc(0.0, th2), 0.0, th2

    lo1, hi1 = 0.0, 1.0
    while leak_frac(alloc(hi1, solve_th2(hi1))) > eps_W:
        hi1 *= 2.0
        if hi1 > 1e18:
            raise ValueError("no feasible multipliers: leakage never balances")
    for _ in range(100):
        mid = 0.5 * (lo1 + hi1)
        if leak_frac(alloc(mid, solve_th2(mid))) > eps_W:
            lo1 = mid
        else:
            hi1 = mid
        if hi1 - lo1 < tol * max(1.0, hi1):
            break
    th1 = 0.5 * (lo1 + hi1)
    th2 = solve_th2(th1)
    return alloc(th1, th2), th1, th2


def uniform_benchmark(omega: float, eps_W: float, rho: float, Pe: float,
                      real_valued: bool = False) -> float:
    """Normal-approximation rate with power spread evenly over the
    leading prolate modes admitted by max_dimensions."""
    from .bounds import na_rate
    from .channel import ChannelModel

    basis = solve_basis(omega)
    n_star, _ = max_dimensions(omega, eps_W, basis=basis)
    if n_star == 0:
        return 0.0
    sigma_sq = np.full(n_star, n_star / (rho * omega))
    ch = ChannelModel(omega=omega, N=n_star, rho=rho, tau=np.nan,
                      sigma_sq=sigma_sq, eigenvalues=None, modes=None,
                      pulse=None)
    return na_rate(ch, Pe, real_valued=real_valued)


def waterfill_benchmark(omega: float, eps_W: float, rho: float, Pe: float,
                        real_valued: bool = False) -> float:
    """Normal-approximation rate with leakage-priced waterfilling over
    the prolate modes (noise level 1, total power rho * omega)."""
    from .bounds import na_rate
    from .channel import ChannelModel

    basis = solve_basis(omega)
    P, _, _ = _waterfill_allocation(basis.eigenvalues, rho * omega, eps_W)
    active = P > 1e-12 * rho * omega
    if not active.any():
        return 0.0
    sigma_sq = 1.0 / P[active]
    ch = ChannelModel(omega=omega, N=int(np.count_nonzero(active)), rho=rho,
                      tau=np.nan, sigma_sq=sigma_sq, eigenvalues=None,
                      modes=None, pulse=None)
    return na_rate(ch, Pe, real_valued=real_valued)
