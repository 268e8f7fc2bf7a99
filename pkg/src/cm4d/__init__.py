"""4D coded-modulation toolkit.

Constellations and binary labelings, the vector AWGN channel, exact and
max-log soft demapping, achievable-rate estimation (MI, GMI, capacity),
a generic binary LDPC chain, labeling optimization, and a sweep harness
that measures how well SNR, pre-FEC BER, MI, and GMI predict the
post-FEC BER of bit-wise receivers.
"""

__version__ = "0.1.0"

from .channel import SnrPoint, SymbolBlock, draw_uniform_symbols, snr_point, transmit
from .demapper import (
    BerStats,
    LlrBlock,
    LlrConvention,
    exact_llrs,
    factorized_llrs,
    hard_decisions,
    maxlog_llrs,
    prefec_ber,
)
from .geometry import (
    Constellation,
    LabeledConstellation,
    Labeling,
    agc2,
    asymptotic_gain_db,
    brgc,
    d4_odd_shells,
    d4_subset,
    load_constellation,
    load_labeling,
    min_sq_distance,
    nbc,
    normalize_energy,
    optimize_packing,
    pam_points,
    product_constellation,
    product_labeling,
    save_constellation,
    save_labeling,
    so_pm_qpsk,
)
from .rates import (
    RateEstimate,
    capacity_awgn4,
    gmi_from_llrs,
    gmi_gh_product,
    gmi_mc,
    mi_gh_product,
    mi_mc,
)

__all__ = [name for name in dir() if not name.startswith("_")]
