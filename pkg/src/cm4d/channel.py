"""Memoryless 4D AWGN channel and SNR bookkeeping.

Noise is zero-mean Gaussian with variance n0/2 per dimension.  All
randomness is drawn from counter-based substreams (see :mod:`cm4d.rng`),
in fixed-size symbol chunks, so transmissions are reproducible and
independent of any worker split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .geometry import DIM, LabeledConstellation

# symbols per substream chunk; frozen, part of the reproducibility contract
CHUNK = 1 << 14


@dataclass(frozen=True)
class SnrPoint:
    """Consistent (es, n0, gamma, eta, ebn0) bundle."""

    es: float
    n0: float
    gamma: float
    eta: float
    ebn0: float

    def __post_init__(self):
        if self.n0 <= 0 or self.eta <= 0:
            raise ValueError("n0 and eta must be positive")
        if abs(self.gamma - self.es / self.n0) > 1e-12 * abs(self.gamma):
            raise ValueError("gamma inconsistent with es/n0")
        if abs(self.ebn0 * self.eta - self.gamma) > 1e-12 * abs(self.gamma):
            raise ValueError("ebn0 inconsistent with gamma/eta")

    @property
    def gamma_db(self) -> float:
        return float(10.0 * np.log10(self.gamma))

    @property
    def ebn0_db(self) -> float:
        return float(10.0 * np.log10(self.ebn0))


def snr_point(gamma_db: float, eta: float, es: float = 1.0) -> SnrPoint:
    """Build the consistent SNR bundle from gamma in dB and a spectral efficiency."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    gamma = float(10.0 ** (gamma_db / 10.0))
    return SnrPoint(es=es, n0=es / gamma, gamma=gamma, eta=eta, ebn0=gamma / eta)


@dataclass(frozen=True)
class SymbolBlock:
    symbols: np.ndarray
    source_indices: np.ndarray

    def __post_init__(self):
        if self.symbols.shape != (self.source_indices.shape[0], DIM):
            raise ValueError("symbols/indices shape mismatch")

    @property
    def ns(self) -> int:
        return self.symbols.shape[0]


def _chunked(seed: int, tag: int, ns: int, per_symbol: int, gaussian: bool) -> np.ndarray:
    out = np.empty(ns * per_symbol, dtype=np.float64)
    for c in range(0, ns, CHUNK):
        n = min(CHUNK, ns - c)
        draw = rng.gaussians if gaussian else rng.uniform01
        out[c * per_symbol : (c + n) * per_symbol] = draw(
            seed, (tag, c // CHUNK), n * per_symbol
        )
    return out


def noise_block(snr: SnrPoint, ns: int, seed: int) -> np.ndarray:
    """(ns, DIM) Gaussian noise with variance n0/2 per dimension."""
    g = _chunked(seed, rng.TAG_NOISE, ns, DIM, gaussian=True).reshape(ns, DIM)
    return g * np.sqrt(snr.n0 / 2.0)


def transmit(block: SymbolBlock, snr: SnrPoint, seed: int) -> np.ndarray:
    """Received symbols: input plus independent per-dimension AWGN."""
    return block.symbols + noise_block(snr, block.ns, seed)


def draw_uniform_symbols(
    lc: LabeledConstellation, ns: int, seed: int
) -> tuple[SymbolBlock, np.ndarray]:
    """Uniform symbol indices plus the corresponding (ns, m) bit matrix.

    The index substream depends only on (seed, position), never on the
    constellation identity, so sweeps over different systems at equal
    sample counts share their randomness (common random numbers).
    """
    if ns < 1:
        raise ValueError("ns must be >= 1")
    u = _chunked(seed, rng.TAG_SYMBOLS, ns, 1, gaussian=False)
    idx = np.minimum((u * lc.size).astype(np.int64), lc.size - 1)
    block = SymbolBlock(symbols=lc.constellation.points[idx], source_indices=idx)
    bits = lc.labeling.bits[idx]
    return block, bits
