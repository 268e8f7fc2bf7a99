"""Achievable-rate estimation: capacity, MI, GMI, per-bit MIs.

Monte Carlo estimators work in fixed-size sample chunks with
counter-based substreams, accumulate in chunk order, and therefore give
bit-identical results for any worker count.  By default the symbol and
noise substreams do not depend on the system under test, so estimates
for different constellations at the same SNR share randomness (common
random numbers); pass a nonzero ``salt`` to decouple them.

For Cartesian-product constellations whose labeling assigns each bit to
one dimension, both the MC estimators (internally) and the quadrature
evaluators exploit the factorization of the conditional density; the
estimator itself is unchanged.

All internals are in nats; outputs are bits per 4D symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .channel import CHUNK, SnrPoint
from .demapper import LlrBlock, LlrConvention
from .geometry import Constellation, LabeledConstellation

LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class RateEstimate:
    value: float
    std_error: float
    method: str  # "gauss_hermite" | "monte_carlo" | "llr_samples"
    samples_or_nodes: int
    per_bit: np.ndarray | None = None
    proxy: bool = False  # True when derived from max-log LLRs (lower-bound style)

    def __post_init__(self):
        if not np.isfinite(self.value) or self.std_error < 0:
            raise ValueError("bad rate estimate")


def capacity_awgn4(gamma: float) -> float:
    """Capacity of the 4D AWGN channel at SNR gamma, bits per 4D symbol."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return float(2.0 * np.log2(1.0 + gamma / 2.0))


def _effective_seed(seed: int, salt: int) -> int:
    return seed if salt == 0 else rng.mix_seed(seed, salt)


def _mc_chunks(samples: int):
    for ci, lo in enumerate(range(0, samples, CHUNK)):
        yield ci, min(CHUNK, samples - lo)


def _draw(seed: int, ci: int, nc: int, m_points: int, n0: float):
    u = rng.uniform01(seed, (rng.TAG_SYMBOLS, ci), nc)
    idx = np.minimum((u * m_points).astype(np.int64), m_points - 1)
    g = rng.gaussians(seed, (rng.TAG_NOISE, ci), nc * 4).reshape(nc, 4)
    return idx, g * np.sqrt(n0 / 2.0)


class _Acc:
    """Mean/variance accumulator with a fixed combination order."""

    def __init__(self, width: int = 1):
        self.s = np.zeros(width)
        self.s2 = 0.0
        self.n = 0

    def add(self, per_bit_sums: np.ndarray, total_sq_sum: float, n: int):
        self.s += per_bit_sums
        self.s2 += total_sq_sum
        self.n += n

    def finish(self) -> tuple[float, float, np.ndarray]:
        per_bit = self.s / self.n
        mean = float(per_bit.sum())
        var = max(self.s2 / self.n - mean * mean, 0.0)
        return mean, float(np.sqrt(var / self.n)), per_bit


def mi_mc(
    c: Constellation, snr: SnrPoint, samples: int, seed: int, salt: int = 0
) -> RateEstimate:
    """Monte Carlo mutual information of the uniform-input 4D AWGN channel."""
    _require_normalized(c.es, snr)
    eff = _effective_seed(seed, salt)
    pts = c.points
    acc = _Acc(1)
    product = c.factors is not None
    for ci, nc in _mc_chunks(samples):
        idx, noise = _draw(eff, ci, nc, c.size, snr.n0)
        y = pts[idx] + noise
        if product:
            g = _mi_contrib_product(y, idx, c.factors, snr.n0)
        else:
            g = _mi_contrib_generic(y, idx, pts, snr.n0)
        acc.add(np.array([g.sum()]), float(g @ g), nc)
    mean, se, _ = acc.finish()
    return RateEstimate(mean / LN2, se / LN2, "monte_carlo", samples)


def gmi_mc(
    lc: LabeledConstellation, snr: SnrPoint, samples: int, seed: int, salt: int = 0
) -> RateEstimate:
    """Monte Carlo generalized mutual information with per-bit breakdown."""
    _require_normalized(lc.constellation.es, snr)
    eff = _effective_seed(seed, salt)
    pts = lc.constellation.points
    acc = _Acc(lc.m)
    structure = lc.per_dim_bits
    mask1 = lc.one_masks.T.astype(np.float64)
    bits = lc.labeling.bits
    for ci, nc in _mc_chunks(samples):
        idx, noise = _draw(eff, ci, nc, lc.size, snr.n0)
        y = pts[idx] + noise
        if structure is not None:
            gk = _gmi_contrib_product(y, idx, structure, snr.n0)
        else:
            gk = _gmi_contrib_generic(y, idx, pts, mask1, bits, snr.n0)
        tot = gk.sum(axis=1)
        acc.add(gk.sum(axis=0), float(tot @ tot), nc)
    mean, se, per_bit = acc.finish()
    return RateEstimate(mean / LN2, se / LN2, "monte_carlo", samples, per_bit=per_bit / LN2)


def _require_normalized(es: float, snr: SnrPoint) -> None:
    if abs(es - snr.es) > 1e-9 * max(snr.es, 1.0):
        raise ValueError(f"constellation es={es:.6g} does not match snr.es={snr.es:.6g}")


def _mi_contrib_generic(y, idx, pts, n0):
    # per-sample log f(y|x) - log f(y) + log M, in nats
    y2 = np.sum(y * y, axis=1)[:, None]
    s2 = np.sum(pts * pts, axis=1)[None, :]
    logk = (2.0 * (y @ pts.T) - y2 - s2) / n0
    shift = logk.max(axis=1)
    lse = shift + np.log(np.exp(logk - shift[:, None]).sum(axis=1))
    own = logk[np.arange(len(idx)), idx]
    return own - lse + np.log(pts.shape[0])


def _mi_contrib_product(y, idx, factors, n0):
    g = np.zeros(y.shape[0])
    rest = idx.copy()
    sizes = [len(f) for f in factors]
    # lexicographic decomposition, dimension 1 most significant
    divisors = np.cumprod([1] + sizes[::-1])[-2::-1]
    for d, levels in enumerate(factors):
        lvl = (rest // divisors[d]) % sizes[d]
        logk = -((y[:, d : d + 1] - levels[None, :]) ** 2) / n0
        shift = logk.max(axis=1)
        lse = shift + np.log(np.exp(logk - shift[:, None]).sum(axis=1))
        g += logk[np.arange(len(lvl)), lvl] - lse + np.log(sizes[d])
    return g


def _gmi_contrib_generic(y, idx, pts, mask1, bits, n0):
    # per-sample, per-bit log f(y|b_true) - log f(y) + log 2, in nats
    y2 = np.sum(y * y, axis=1)[:, None]
    s2 = np.sum(pts * pts, axis=1)[None, :]
    logk = (2.0 * (y @ pts.T) - y2 - s2) / n0
    shift = logk.max(axis=1, keepdims=True)
    a = np.exp(logk - shift)
    total = a.sum(axis=1, keepdims=True)
    s1 = a @ mask1
    b = bits[idx].astype(bool)
    s_true = np.where(b, s1, total - s1)
    # the true-bit subset contains the transmitted point, so s_true > 0
    return np.log(s_true) - np.log(total) + np.log(2.0)


def _gmi_contrib_product(y, idx, structure, n0):
    sizes = [len(levels) for levels, _ in structure]
    m_total = sum(lab.m for _, lab in structure)
    gk = np.empty((y.shape[0], m_total))
    divisors = np.cumprod([1] + sizes[::-1])[-2::-1]
    col = 0
    for d, (levels, lab) in enumerate(structure):
        if lab.m == 0:
            continue
        lvl = (idx // divisors[d]) % sizes[d]
        logk = -((y[:, d : d + 1] - levels[None, :]) ** 2) / n0
        shift = logk.max(axis=1, keepdims=True)
        a = np.exp(logk - shift)
        total = a.sum(axis=1)
        bits_d = lab.bits.astype(bool)
        for j in range(lab.m):
            sel = bits_d[:, j]
            s1 = a[:, sel].sum(axis=1)
            b = sel[lvl]
            s_true = np.where(b, s1, total - s1)
            gk[:, col + j] = np.log(s_true) - np.log(total) + np.log(2.0)
        col += lab.m
    return gk


# ---------------------------------------------------------------------------
# Gauss-Hermite quadrature for product constellations


def _gh_nodes(nodes: int):
    if not 10 <= nodes <= 64:
        raise ValueError("nodes must be in [10, 64]")
    t, w = np.polynomial.hermite.hermgauss(nodes)
    return t, w / np.sqrt(np.pi)


def _gh_dim_tables(levels: np.ndarray, n0: float, nodes: int):
    """Quadrature tables for one dimension.

    Returns (lse_all, logk) where logk[i, q, j] is the log kernel of
    level j at the q-th node around transmitted level i, and lse_all is
    the log of the uniform mixture density (up to a common constant).
    """
    t, w = _gh_nodes(nodes)
    y = levels[:, None] + np.sqrt(n0) * t[None, :]  # noise variance n0/2 per dim
    logk = -((y[:, :, None] - levels[None, None, :]) ** 2) / n0
    shift = logk.max(axis=2)
    lse_all = shift + np.log(np.exp(logk - shift[:, :, None]).sum(axis=2))
    return lse_all, logk, w


def mi_gh_product(c: Constellation, snr: SnrPoint, nodes: int = 20) -> RateEstimate:
    """MI of a product constellation by per-dimension 1D quadrature."""
    _require_normalized(c.es, snr)
    if c.factors is None:
        raise ValueError("not a product constellation")
    total = 0.0
    for levels in c.factors:
        L = len(levels)
        if L == 1:
            continue
        lse_all, logk, w = _gh_dim_tables(np.asarray(levels, float), snr.n0, nodes)
        own = logk[np.arange(L), :, np.arange(L)]
        contrib = own - lse_all + np.log(L)
        total += float(np.mean(contrib @ w))
    return RateEstimate(total / LN2, 0.0, "gauss_hermite", nodes)


def gmi_gh_product(lc: LabeledConstellation, snr: SnrPoint, nodes: int = 20) -> RateEstimate:
    """GMI of a product constellation with per-dimension bit assignment."""
    _require_normalized(lc.constellation.es, snr)
    structure = lc.per_dim_bits
    if structure is None:
        raise ValueError("constellation/labeling is not a per-dimension product")
    per_bit = []
    for levels, lab in structure:
        if lab.m == 0:
            continue
        L = len(levels)
        lse_all, logk, w = _gh_dim_tables(np.asarray(levels, float), snr.n0, nodes)
        shift = logk.max(axis=2, keepdims=True)
        a = np.exp(logk - shift)
        bits_d = lab.bits.astype(bool)
        for j in range(lab.m):
            sel = bits_d[:, j]
            s1 = a[:, :, sel].sum(axis=2)
            s0 = a[:, :, ~sel].sum(axis=2)
            s_true = np.where(sel[:, None], s1, s0)
            contrib = shift[:, :, 0] + np.log(s_true) - lse_all + np.log(2.0)
            per_bit.append(float(np.mean(contrib @ w)))
    per_bit = np.array(per_bit) / LN2
    return RateEstimate(float(per_bit.sum()), 0.0, "gauss_hermite", nodes, per_bit=per_bit)


# ---------------------------------------------------------------------------
# GMI from LLR samples


def gmi_from_llrs(block: LlrBlock) -> RateEstimate:
    """GMI estimated directly from (LLR, true bit) pairs.

    Exact for LLRs computed from the true conditional densities; for
    max-log input the value is a lower-bound-style proxy and is flagged.
    """
    if block.true_bits is None:
        raise ValueError("LlrBlock carries no true bits")
    lam = block.llrs
    if block.convention is LlrConvention.ZERO_OVER_ONE:
        lam = -lam
    sign = 2.0 * block.true_bits.astype(np.float64) - 1.0
    loss = np.logaddexp(0.0, -sign * lam) / LN2  # log2(1 + e^{-(2b-1)L})
    per_symbol = block.m - loss.sum(axis=1)
    value = float(per_symbol.mean())
    se = float(per_symbol.std(ddof=0) / np.sqrt(block.ns))
    per_bit = 1.0 - loss.mean(axis=0)
    return RateEstimate(
        value, se, "llr_samples", block.ns, per_bit=per_bit, proxy=block.kind == "maxlog"
    )
