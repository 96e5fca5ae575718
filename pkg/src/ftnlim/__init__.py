"""Performance limits of faster-than-Nyquist signaling at finite
time-bandwidth product: pulses, channel models, rate bounds, prolate
benchmarks, pulse design and a three-stage coded receiver."""

from .pulse import (Pulse, SpectralProfile, make_rrc, make_gaussian,
                    make_fs_pulse, make_pswf_principal, make_sinc, spectrum,
                    oob_energy, min_c, autocorrelation)
from .channel import (ChannelModel, symbol_count, build_gram, diagonalize,
                      folded_spectrum_eigs, make_channel, ooi_max_blocklength)
from .bounds import (BoundResult, CgfEval, capacity_ftn, na_rate, na_bler,
                     cgf, saddlepoint_log_cdf, mc_rate, rcu_bler, rcu_rate,
                     moments_mismatched)
from .pswf import (PswfBasis, solve_basis, max_dimensions, uniform_benchmark,
                   waterfill_benchmark)
from .design import (tau_star, percent_gain, reference_design,
                     FS_REFERENCE_DESIGNS, FsDesignSpec, FsDesignResult,
                     optimize_fs_pulse)
from .turbo import (CodingConfig, ThreeStageLink, rsc_encode, urc_encode,
                    s_random_interleaver, qpsk_modulate, ftn_transmit,
                    map_equalize, three_stage_receive, wilson_interval,
                    bler_sweep)

__version__ = "0.1.0"
