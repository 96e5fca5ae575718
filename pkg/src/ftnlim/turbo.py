"""Three-stage turbo-equalized faster-than-Nyquist link.

Transmit chain: rate-1/2 recursive systematic code, S-random interleaver,
unity-rate recursive code, second S-random interleaver, Gray-mapped QPSK,
matched-filter channel with colored noise.  The receiver exchanges
extrinsic log-likelihood ratios between a reduced-memory Ungerboeck-trellis
MAP equalizer and the two code decoders: the equalizer and the unity-rate
code form the inner loop, the outer code closes the outer loop.

LLR convention throughout: natural log, positive means bit 0 more likely.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .channel import build_gram, diagonalize
from .pulse import Pulse

try:
    from numba import njit as _njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a soft dependency
    HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        def wrap(f):
            return f
        return wrap

logger = logging.getLogger(__name__)

__all__ = [
    "CodingConfig",
    "QPSK_ALPHABET",
    "rsc_encode",
    "urc_encode",
    "s_random_interleaver",
    "qpsk_modulate",
    "ftn_transmit",
    "map_equalize",
    "ThreeStageLink",
    "three_stage_receive",
    "bler_sweep",
    "wilson_interval",
]

_NEG_INF = -np.inf

# Symbol index 2*b0 + b1; bit 0 steers the real part, bit 1 the imaginary
# part (bit value 0 -> +1/sqrt(2)), which is Gray labeling by construction.
QPSK_ALPHABET = np.array(
    [1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j], dtype=complex) / np.sqrt(2.0)


@dataclass
class CodingConfig:
    """Frame layout and iteration schedule of the three-stage link."""
    info_bits: int = 128
    equalizer_memory: int = 3          # L: trellis remembers the last L symbols
    inner_iterations: int = 5          # equalizer <-> unity-rate code
    outer_iterations: int = 30         # cap on outer loops
    early_stop: bool = True            # exit once decisions repeat across an outer loop
    interleaver_seed: int = 2026

    def __post_init__(self):
        if self.info_bits < 8 or self.info_bits % 2:
            raise ValueError("info_bits must be even and >= 8")
        if not 1 <= self.equalizer_memory <= 8:
            raise ValueError("memory too large: need 1 <= L <= 8")
        if self.inner_iterations < 1 or self.outer_iterations < 1:
            raise ValueError("iteration counts must be positive")

    @property
    def coded_bits(self) -> int:
        return 2 * self.info_bits

    @property
    def n_symbols(self) -> int:
        return self.info_bits  # rate 1/2 then QPSK: 2K bits / 2 per symbol


# ---------------------------------------------------------------------------
# encoders and interleaver
# ---------------------------------------------------------------------------

def _as_bits(bits) -> np.ndarray:
    b = np.asarray(bits)
    if b.ndim != 1 or not np.all((b == 0) | (b == 1)):
        raise ValueError("need a flat array of 0/1 bits")
    return b.astype(np.uint8)


def rsc_encode(bits) -> np.ndarray:
    """Rate-1/2 systematic recursive encoder, feedback 1+D and feedforward D,
    zero initial state, unterminated.  Output interleaves systematic and
    parity bits: [u_0, p_0, u_1, p_1, ...]."""
    u = _as_bits(bits)
    # register r_t = u_0 ^ ... ^ u_{t-1}; parity taps the register
    acc = np.bitwise_xor.accumulate(u)
    par = np.empty_like(u)
    par[0] = 0
    par[1:] = acc[:-1]
    out = np.empty(2 * u.size, dtype=np.uint8)
    out[0::2] = u
    out[1::2] = par
    return out


def urc_encode(bits) -> np.ndarray:
    """Unity-rate accumulator 1/(1+D): o_t = u_t ^ o_{t-1}, zero state."""
    return np.bitwise_xor.accumulate(_as_bits(bits)).astype(np.uint8)


@_njit(cache=True)
def _s_random_kernel(l, s, seed, max_attempts):
    """Randomized greedy search with tail backtracking; returns an empty
    array when the attempt budget runs out."""
    np.random.seed(seed)
    out = np.empty(l, dtype=np.int64)
    rem = np.empty(l, dtype=np.int64)
    for _ in range(max_attempts):
        for v in range(l):
            rem[v] = v
        size = l
        i = 0
        wedges = 0
        ok = True
        while i < l:
            lo = i - s + 1
            if lo < 0:
                lo = 0
            # uniform pick among feasible values by reservoir sampling
            pick = -1
            cnt = 0
            for k in range(size):
                v = rem[k]
                feas = True
                for j in range(lo, i):
                    d = v - out[j]
                    if d < 0:
                        d = -d
                    if d < s:
                        feas = False
                        break
                if feas:
                    cnt += 1
                    if np.random.random() * cnt < 1.0:
                        pick = k
            if pick < 0:
                # wedged: return the last stretch to the pool and retry it
                wedges += 1
                if wedges > 100:
                    ok = False
                    break
                depth = 2 * s
                if depth > i:
                    depth = i
                for j in range(i - depth, i):
                    rem[size] = out[j]
                    size += 1
                i -= depth
                continue
            v = rem[pick]
            rem[pick] = rem[size - 1]
            size -= 1
            out[i] = v
            i += 1
        if ok:
            return out
    return np.empty(0, dtype=np.int64)


_interleaver_cache = {}


def s_random_interleaver(l: int, seed: int, max_attempts: int = 100_000) -> np.ndarray:
    """Permutation with |pi(i) - pi(j)| >= S whenever |i - j| < S, for
    S = floor(sqrt(l/2)); seeded random search, never silent: if the attempt
    budget is exhausted the separation degrades to S-1 with a log line."""
    if l < 8:
        raise ValueError("interleaver length must be >= 8")
    key = (l, seed, max_attempts)
    if key in _interleaver_cache:
        return _interleaver_cache[key].copy()
    s_target = int(math.floor(math.sqrt(l / 2.0)))
    s = s_target
    while True:
        perm = _s_random_kernel(l, s, seed % 2 ** 32, max_attempts)
        if perm.size:
            if s < s_target:
                logger.warning("s_random_interleaver(l=%d): separation relaxed "
                               "%d -> %d after %d failed attempts per level",
                               l, s_target, s, max_attempts)
            _interleaver_cache[key] = perm
            return perm.copy()
        s -= 1


def qpsk_modulate(bits) -> np.ndarray:
    """Gray QPSK, two bits per symbol: (b0, b1) -> index 2 b0 + b1."""
    b = _as_bits(bits)
    if b.size % 2:
        raise ValueError("QPSK needs an even number of bits")
    idx = 2 * b[0::2].astype(np.int64) + b[1::2]
    return QPSK_ALPHABET[idx]


# ---------------------------------------------------------------------------
# channel
# ---------------------------------------------------------------------------

def _colored_noise(sqrt_lam: np.ndarray, U: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    w = (rng.standard_normal(sqrt_lam.size)
         + 1j * rng.standard_normal(sqrt_lam.size)) * np.sqrt(0.5)
    return U @ (sqrt_lam * w)


def ftn_transmit(symbols, p: Pulse, tau: float, rho: float, omega: float,
                 seed: int) -> np.ndarray:
    """Matched-filter observation y = sqrt(rho Omega / N) H x + z with
    noise covariance H, synthesized through the eigen-factorization."""
    x = np.asarray(symbols, dtype=complex)
    H = build_gram(p, tau, x.size)
    lam, U = diagonalize(H)
    rng = np.random.default_rng(seed)
    z = _colored_noise(np.sqrt(lam), U, rng)
    return np.sqrt(rho * omega / x.size) * (H @ x) + z


# ---------------------------------------------------------------------------
# log-MAP kernels
# ---------------------------------------------------------------------------

@_njit(cache=True)
def _lse2(a, b):
    if a < b:
        a, b = b, a
    if b == _NEG_INF:
        return a
    return a + math.log1p(math.exp(b - a))


@_njit(cache=True)
def _equalize_kernel(yr, yi, h, nu, sym_lp, L):
    """A-posteriori bit LLRs from the Ungerboeck-trellis log-MAP pass.

    State = indices of the last L symbols (base 4, most recent in the low
    digit); branch metric for candidate symbol x_k at time n:
      (2 Re{x_k* y_n} - h_0 |x_k|^2 - 2 Re{x_k* sum_l h_l x_{n-l}}) / nu
    plus the symbol's a-priori log-probability.  Missing history at the
    block head contributes no interference terms.
    """
    N = yr.shape[0]
    S = 4 ** L
    shift = S // 4 if S >= 4 else 1
    ar = np.empty(4)
    ai = np.empty(4)
    inv_sq2 = 1.0 / math.sqrt(2.0)
    for k in range(4):
        ar[k] = (1.0 - 2.0 * (k >> 1)) * inv_sq2
        ai[k] = (1.0 - 2.0 * (k & 1)) * inv_sq2

    nxt = np.empty((S, 4), dtype=np.int64)
    for s in range(S):
        for k in range(4):
            nxt[s, k] = (k + 4 * (s % shift)) % S

    gamma = np.empty((N, S, 4))
    for n in range(N):
        m = n if n < L else L
        for s in range(S):
            isi_r = 0.0
            isi_i = 0.0
            ss = s
            for l in range(1, L + 1):
                d = ss % 4
                ss //= 4
                if l <= m:
                    isi_r += h[l] * ar[d]
                    isi_i += h[l] * ai[d]
            for k in range(4):
                rxy = ar[k] * yr[n] + ai[k] * yi[n]
                rxi = ar[k] * isi_r + ai[k] * isi_i
                e_k = ar[k] * ar[k] + ai[k] * ai[k]
                gamma[n, s, k] = ((2.0 * rxy - h[0] * e_k - 2.0 * rxi) / nu
                                  + sym_lp[n, k])

    alpha = np.full((N + 1, S), _NEG_INF)
    alpha[0, 0] = 0.0
    for n in range(N):
        for s in range(S):
            a = alpha[n, s]
            if a == _NEG_INF:
                continue
            for k in range(4):
                t = nxt[s, k]
                alpha[n + 1, t] = _lse2(alpha[n + 1, t], a + gamma[n, s, k])
        mx = _NEG_INF
        for s in range(S):
            if alpha[n + 1, s] > mx:
                mx = alpha[n + 1, s]
        for s in range(S):
            alpha[n + 1, s] -= mx

    beta = np.zeros((N + 1, S))
    for n in range(N - 1, -1, -1):
        mx = _NEG_INF
        for s in range(S):
            acc = _NEG_INF
            for k in range(4):
                acc = _lse2(acc, gamma[n, s, k] + beta[n + 1, nxt[s, k]])
            beta[n, s] = acc
            if acc > mx:
                mx = acc
        for s in range(S):
            beta[n, s] -= mx

    app = np.empty((N, 2))
    for n in range(N):
        n00 = _NEG_INF
        n01 = _NEG_INF
        n10 = _NEG_INF
        n11 = _NEG_INF
        for s in range(S):
            a = alpha[n, s]
            if a == _NEG_INF:
                continue
            for k in range(4):
                v = a + gamma[n, s, k] + beta[n + 1, nxt[s, k]]
                if (k >> 1) == 0:
                    n00 = _lse2(n00, v)
                else:
                    n01 = _lse2(n01, v)
                if (k & 1) == 0:
                    n10 = _lse2(n10, v)
                else:
                    n11 = _lse2(n11, v)
        app[n, 0] = n00 - n01
        app[n, 1] = n10 - n11
    return app


@_njit(cache=True)
def _bit_log_metrics_nb(llr):
    """(K, 2) array of (ln P[b=0], ln P[b=1]) from LLRs, overflow-safe."""
    K = llr.shape[0]
    lp = np.empty((K, 2))
    for t in range(K):
        x = llr[t]
        sp = math.log1p(math.exp(-abs(x)))
        if x >= 0.0:
            lp[t, 0] = -sp
            lp[t, 1] = -x - sp
        else:
            lp[t, 0] = x - sp
            lp[t, 1] = -sp
    return lp


@_njit(cache=True)
def _rsc_bcjr(la_sys, la_par):
    """Log-MAP pass over the 2-state systematic recursive code.

    Branch (state s, input u) emits systematic bit u and parity bit s and
    moves to state u ^ s.  Returns (K, 2) a-posteriori LLRs: column 0 for
    the systematic bit, column 1 for the parity bit.
    """
    K = la_sys.shape[0]
    lps = _bit_log_metrics_nb(la_sys)
    lpp = _bit_log_metrics_nb(la_par)
    alpha = np.empty((K + 1, 2))
    alpha[0, 0] = 0.0
    alpha[0, 1] = _NEG_INF
    for t in range(K):
        g00 = lps[t, 0] + lpp[t, 0]   # s=0, u=0 -> next 0
        g01 = lps[t, 1] + lpp[t, 0]   # s=0, u=1 -> next 1
        g10 = lps[t, 0] + lpp[t, 1]   # s=1, u=0 -> next 1
        g11 = lps[t, 1] + lpp[t, 1]   # s=1, u=1 -> next 0
        n0 = _lse2(alpha[t, 0] + g00, alpha[t, 1] + g11)
        n1 = _lse2(alpha[t, 0] + g01, alpha[t, 1] + g10)
        mx = n0 if n0 > n1 else n1
        alpha[t + 1, 0] = n0 - mx
        alpha[t + 1, 1] = n1 - mx

    beta = np.empty((K + 1, 2))
    beta[K, 0] = 0.0
    beta[K, 1] = 0.0
    for t in range(K - 1, -1, -1):
        g00 = lps[t, 0] + lpp[t, 0]
        g01 = lps[t, 1] + lpp[t, 0]
        g10 = lps[t, 0] + lpp[t, 1]
        g11 = lps[t, 1] + lpp[t, 1]
        b0 = _lse2(g00 + beta[t + 1, 0], g01 + beta[t + 1, 1])
        b1 = _lse2(g10 + beta[t + 1, 1], g11 + beta[t + 1, 0])
        mx = b0 if b0 > b1 else b1
        beta[t, 0] = b0 - mx
        beta[t, 1] = b1 - mx

    llr = np.empty((K, 2))
    for t in range(K):
        g00 = lps[t, 0] + lpp[t, 0]
        g01 = lps[t, 1] + lpp[t, 0]
        g10 = lps[t, 0] + lpp[t, 1]
        g11 = lps[t, 1] + lpp[t, 1]
        w00 = alpha[t, 0] + g00 + beta[t + 1, 0]   # u=0, s=0
        w01 = alpha[t, 0] + g01 + beta[t + 1, 1]   # u=1, s=0
        w10 = alpha[t, 1] + g10 + beta[t + 1, 1]   # u=0, s=1
        w11 = alpha[t, 1] + g11 + beta[t + 1, 0]   # u=1, s=1
        llr[t, 0] = _lse2(w00, w10) - _lse2(w01, w11)   # systematic (by u)
        llr[t, 1] = _lse2(w00, w01) - _lse2(w10, w11)   # parity (by s)
    return llr


@_njit(cache=True)
def _urc_bcjr(la_u, ch_v):
    """Log-MAP pass over the 2-state accumulator v_t = u_t ^ v_{t-1}.

    Branch (state s, input u) emits v = u ^ s and moves to state v.
    Returns (K, 2) a-posteriori LLRs: column 0 for the input bit u,
    column 1 for the output bit v.
    """
    K = la_u.shape[0]
    lpu = _bit_log_metrics_nb(la_u)
    lpv = _bit_log_metrics_nb(ch_v)
    alpha = np.empty((K + 1, 2))
    alpha[0, 0] = 0.0
    alpha[0, 1] = _NEG_INF
    for t in range(K):
        g00 = lpu[t, 0] + lpv[t, 0]   # s=0, u=0, v=0 -> next 0
        g01 = lpu[t, 1] + lpv[t, 1]   # s=0, u=1, v=1 -> next 1
        g10 = lpu[t, 0] + lpv[t, 1]   # s=1, u=0, v=1 -> next 1
        g11 = lpu[t, 1] + lpv[t, 0]   # s=1, u=1, v=0 -> next 0
        n0 = _lse2(alpha[t, 0] + g00, alpha[t, 1] + g11)
        n1 = _lse2(alpha[t, 0] + g01, alpha[t, 1] + g10)
        mx = n0 if n0 > n1 else n1
        alpha[t + 1, 0] = n0 - mx
        alpha[t + 1, 1] = n1 - mx

    beta = np.empty((K + 1, 2))
    beta[K, 0] = 0.0
    beta[K, 1] = 0.0
    for t in range(K - 1, -1, -1):
        g00 = lpu[t, 0] + lpv[t, 0]
        g01 = lpu[t, 1] + lpv[t, 1]
        g10 = lpu[t, 0] + lpv[t, 1]
        g11 = lpu[t, 1] + lpv[t, 0]
        b0 = _lse2(g00 + beta[t + 1, 0], g01 + beta[t + 1, 1])
        b1 = _lse2(g10 + beta[t + 1, 1], g11 + beta[t + 1, 0])
        mx = b0 if b0 > b1 else b1
        beta[t, 0] = b0 - mx
        beta[t, 1] = b1 - mx

    llr = np.empty((K, 2))
    for t in range(K):
        g00 = lpu[t, 0] + lpv[t, 0]
        g01 = lpu[t, 1] + lpv[t, 1]
        g10 = lpu[t, 0] + lpv[t, 1]
        g11 = lpu[t, 1] + lpv[t, 0]
        w00 = alpha[t, 0] + g00 + beta[t + 1, 0]   # u=0, v=0
        w01 = alpha[t, 0] + g01 + beta[t + 1, 1]   # u=1, v=1
        w10 = alpha[t, 1] + g10 + beta[t + 1, 1]   # u=0, v=1
        w11 = alpha[t, 1] + g11 + beta[t + 1, 0]   # u=1, v=0
        llr[t, 0] = _lse2(w00, w10) - _lse2(w01, w11)   # input u
        llr[t, 1] = _lse2(w00, w11) - _lse2(w01, w10)   # output v
    return llr


def _bit_log_metrics(llr: np.ndarray) -> np.ndarray:
    """(K, 2) array of (ln P[b=0], ln P[b=1]) from LLRs."""
    lp0 = -np.logaddexp(0.0, -llr)
    out = np.empty((llr.size, 2))
    out[:, 0] = lp0
    out[:, 1] = lp0 - llr
    return out


def map_equalize(y, h, nu: float, apriori) -> np.ndarray:
    """Extrinsic bit LLRs of a log-MAP equalizer pass.

    y: matched-filter outputs normalized so y = Hx + noise of scale nu
    (callers divide out the amplitude sqrt(rho Omega / N)); h: real
    autocorrelation taps h[0..L]; apriori: two LLRs per symbol.  The
    returned extrinsic is the a-posteriori minus the same bit's a-priori.
    """
    y = np.asarray(y, dtype=complex)
    h = np.asarray(h, dtype=float)
    apriori = np.asarray(apriori, dtype=float)
    L = h.size - 1
    if L > 8:
        raise ValueError("memory too large: need at most 8 taps past h_0")
    if apriori.size != 2 * y.size:
        raise ValueError("apriori must carry two LLRs per symbol")
    if not np.all(np.isfinite(apriori)):
        raise ValueError("apriori LLRs must be finite")
    lp = _bit_log_metrics(apriori)
    b0 = lp[0::2]
    b1 = lp[1::2]
    sym_lp = np.empty((y.size, 4))
    sym_lp[:, 0] = b0[:, 0] + b1[:, 0]
    sym_lp[:, 1] = b0[:, 0] + b1[:, 1]
    sym_lp[:, 2] = b0[:, 1] + b1[:, 0]
    sym_lp[:, 3] = b0[:, 1] + b1[:, 1]
    app = _equalize_kernel(np.ascontiguousarray(y.real),
                           np.ascontiguousarray(y.imag),
                           h, float(nu), sym_lp, L)
    return app.ravel() - apriori


# ---------------------------------------------------------------------------
# three-stage receiver
# ---------------------------------------------------------------------------

_LLR_CLIP = 100.0  # exchanged extrinsics are softly bounded for stability


class ThreeStageLink:
    """Precomputed state of one (config, pulse, tau, omega) operating point.

    Holds the Gram matrix, its factorization, the equalizer taps and both
    interleavers; SNR enters only at transmit/receive time, so one link
    serves a whole SNR sweep.  The pulse itself is not retained, which
    keeps the object picklable for worker pools.
    """

    def __init__(self, cfg: CodingConfig, p: Pulse, tau: float, omega: float):
        self.cfg = cfg
        self.tau = float(tau)
        self.omega = float(omega)
        N = cfg.n_symbols
        self.H = build_gram(p, tau, N)
        lam, U = diagonalize(self.H)
        self.sqrt_lam = np.sqrt(lam)
        self.U = U
        L = min(cfg.equalizer_memory, N - 1)
        self.taps = self.H[0, :L + 1].copy()
        self.pi1 = s_random_interleaver(cfg.coded_bits, cfg.interleaver_seed)
        self.pi2 = s_random_interleaver(cfg.coded_bits, cfg.interleaver_seed + 1)

    @property
    def n_symbols(self) -> int:
        return self.cfg.n_symbols

    @property
    def rate_bps_hz(self) -> float:
        return self.cfg.info_bits / self.omega

    def encode(self, bits) -> np.ndarray:
        c = rsc_encode(bits)
        v = urc_encode(c[self.pi1])
        return qpsk_modulate(v[self.pi2])

    def transmit(self, bits, rho: float, rng: np.random.Generator) -> np.ndarray:
        x = self.encode(bits)
        z = _colored_noise(self.sqrt_lam, self.U, rng)
        return np.sqrt(rho * self.omega / self.n_symbols) * (self.H @ x) + z

    def receive(self, y, rho: float):
        """Run the iterative schedule; returns (info bit decisions, outer
        iterations actually used)."""
        cfg = self.cfg
        N = self.n_symbols
        nu = N / (rho * self.omega)
        y_n = np.asarray(y, dtype=complex) / np.sqrt(rho * self.omega / N)
        la_w = np.zeros(cfg.coded_bits)       # apriori at the equalizer
        la_u = np.zeros(cfg.coded_bits)       # apriori at the unity-rate code
        ext_u = np.zeros(cfg.coded_bits)
        prev = None
        decisions = None
        iters = 0
        for outer in range(cfg.outer_iterations):
            iters = outer + 1
            for _ in range(cfg.inner_iterations):
                ext_eq = np.clip(map_equalize(y_n, self.taps, nu, la_w),
                                 -_LLR_CLIP, _LLR_CLIP)
                ch_v = np.empty(cfg.coded_bits)
                ch_v[self.pi2] = ext_eq       # de-interleave onto the v stream
                urc = _urc_bcjr(la_u, ch_v)
                ext_v = np.clip(urc[:, 1] - ch_v, -_LLR_CLIP, _LLR_CLIP)
                la_w = ext_v[self.pi2]
                ext_u = np.clip(urc[:, 0] - la_u, -_LLR_CLIP, _LLR_CLIP)
            llr_c = np.empty(cfg.coded_bits)
            llr_c[self.pi1] = ext_u           # de-interleave onto the c stream
            rsc = _rsc_bcjr(llr_c[0::2], llr_c[1::2])
            app_sys = rsc[:, 0]
            app_par = rsc[:, 1]
            ext_c = np.empty(cfg.coded_bits)
            ext_c[0::2] = app_sys - llr_c[0::2]
            ext_c[1::2] = app_par - llr_c[1::2]
            np.clip(ext_c, -_LLR_CLIP, _LLR_CLIP, out=ext_c)
            la_u = ext_c[self.pi1]
            decisions = (app_sys < 0).astype(np.uint8)
            if cfg.early_stop and prev is not None and np.array_equal(decisions, prev):
                break
            prev = decisions
        return decisions, iters


def three_stage_receive(y, link: ThreeStageLink, rho: float):
    """Decode one received frame; returns (bits, outer iterations used)."""
    return link.receive(y, rho)


# ---------------------------------------------------------------------------
# BLER measurement
# ---------------------------------------------------------------------------

def wilson_interval(errors: int, trials: int, z: float = 1.959963984540054):
    """Wilson score interval for a binomial proportion (95% by default)."""
    if trials <= 0:
        raise ValueError("need at least one trial")
    phat = errors / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / trials
                                   + z * z / (4 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


def _run_blocks(link: ThreeStageLink, rho: float, seed: int, point: int,
                start: int, stop: int):
    errors = 0
    iters_sum = 0
    K = link.cfg.info_bits
    for b in range(start, stop):
        rng = np.random.default_rng(np.random.SeedSequence([seed, point, b]))
        bits = rng.integers(0, 2, K).astype(np.uint8)
        y = link.transmit(bits, rho, rng)
        hat, iters = link.receive(y, rho)
        errors += int(not np.array_equal(hat, bits))
        iters_sum += iters
    return errors, iters_sum


def bler_sweep(link: ThreeStageLink, snr_db_list, blocks: int, seed: int,
               workers: int = 1, progress=None):
    """Block-error-rate sweep; per-block seeds derive from (seed, point
    index, block index) so results never depend on worker count.

    Returns one record per SNR point: {snr_db, blocks, block_errors, bler,
    ci_low, ci_high, mean_iterations}.
    """
    if blocks < 1:
        raise ValueError("need at least one block")
    records = []
    for point, snr_db in enumerate(snr_db_list):
        rho = 10.0 ** (snr_db / 10.0)
        if workers > 1:
            from concurrent.futures import ProcessPoolExecutor
            chunk = max(1, -(-blocks // workers))
            spans = [(a, min(a + chunk, blocks))
                     for a in range(0, blocks, chunk)]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(
                    _run_blocks, [link] * len(spans), [rho] * len(spans),
                    [seed] * len(spans), [point] * len(spans),
                    [a for a, _ in spans], [b for _, b in spans]))
            errors = sum(e for e, _ in parts)
            iters_sum = sum(i for _, i in parts)
        else:
            errors, iters_sum = _run_blocks(link, rho, seed, point, 0, blocks)
        lo, hi = wilson_interval(errors, blocks)
        rec = {"snr_db": float(snr_db), "blocks": int(blocks),
               "block_errors": int(errors), "bler": errors / blocks,
               "ci_low": lo, "ci_high": hi,
               "mean_iterations": iters_sum / blocks}
        records.append(rec)
        if progress is not None:
            progress(rec)
    return records
