"""Binary switching algorithm: local search over label-pair swaps.

The cost callable must be a deterministic function of the labeling; the
GMI cost freezes one set of (symbol, noise) draws and reuses it for
every evaluation, so two evaluations of the same labeling are
bit-identical and restarts are comparable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng
from .channel import SnrPoint
from .geometry import Constellation, LabeledConstellation, Labeling, normalize_energy
from .parallel import ordered_map
from .rates import LN2


@dataclass(frozen=True)
class BsaRun:
    best_labeling: Labeling
    best_cost: float
    restarts: int
    target_snr: SnrPoint
    seed: int
    trajectory: np.ndarray  # final cost of each restart


def gmi_cost(
    base: Constellation, snr: SnrPoint, samples: int = 20000, seed: int = 0
) -> Callable[[Labeling], float]:
    """Return labeling -> -GMI with frozen common random numbers.

    The per-point likelihood kernel is precomputed once; a labeling
    evaluation only regroups it by bit subsets, so full swap passes stay
    cheap even with tens of thousands of frozen samples.
    """
    c = normalize_energy(base)
    pts = c.points
    m_points = c.size
    m_bits = int(np.log2(m_points))
    if (1 << m_bits) != m_points:
        raise ValueError("constellation size must be a power of two")
    u = rng.uniform01(seed, (rng.TAG_LABELING, 0), samples)
    idx = np.minimum((u * m_points).astype(np.int64), m_points - 1)
    noise = rng.gaussians(seed, (rng.TAG_LABELING, 1), samples * 4).reshape(samples, 4)
    y = pts[idx] + noise * np.sqrt(snr.n0 / 2.0)
    y2 = np.sum(y * y, axis=1)[:, None]
    s2 = np.sum(pts * pts, axis=1)[None, :]
    logk = (2.0 * (y @ pts.T) - y2 - s2) / snr.n0
    kernel = np.exp(logk - logk.max(axis=1, keepdims=True))  # (samples, M)
    total = kernel.sum(axis=1, keepdims=True)
    log_total_sum = float(np.log(total).sum())

    def cost(lab: Labeling) -> float:
        if lab.size != m_points:
            raise ValueError("labeling size mismatch")
        bits = lab.bits.astype(np.float64)  # (M, m)
        s1 = kernel @ bits
        b = lab.bits[idx].astype(bool)
        s_true = np.where(b, s1, total - s1)
        gmi_nats = (
            float(np.log(s_true).sum()) - m_bits * log_total_sum
        ) / samples + m_bits * np.log(2.0)
        return -gmi_nats / LN2

    def point_deficits(lab: Labeling) -> np.ndarray:
        """Per-point shortfall from perfect per-bit information, used by
        the opt-in neighborhood cap to rank swap candidates."""
        bits = lab.bits.astype(np.float64)
        s1 = kernel @ bits
        b = lab.bits[idx].astype(bool)
        s_true = np.where(b, s1, total - s1)
        g = (np.log(s_true).sum(axis=1) - m_bits * np.log(total[:, 0])) / LN2 + m_bits
        sums = np.zeros(m_points)
        counts = np.zeros(m_points)
        np.add.at(sums, idx, g)
        np.add.at(counts, idx, 1)
        with np.errstate(invalid="ignore"):
            mean = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        return m_bits - mean

    cost.point_deficits = point_deficits  # type: ignore[attr-defined]
    return cost


def _swapped(words: np.ndarray, i: int, j: int) -> np.ndarray:
    out = words.copy()
    out[i], out[j] = out[j], out[i]
    return out


def _pass_pairs(words, m_bits, cost, max_pass_pairs):
    m_points = words.shape[0]
    if max_pass_pairs is None or not hasattr(cost, "point_deficits"):
        yield from ((i, j) for i in range(m_points - 1) for j in range(i + 1, m_points))
        return
    deficits = cost.point_deficits(Labeling(m_bits, words))
    t = 2
    while t * (t - 1) // 2 < max_pass_pairs and t < m_points:
        t += 1
    worst = np.sort(np.argsort(-deficits, kind="stable")[:t])
    yield from ((int(worst[a]), int(worst[b])) for a in range(t - 1) for b in range(a + 1, t))


def _local_search(
    words: np.ndarray,
    m_bits: int,
    cost: Callable[[Labeling], float],
    max_pass_pairs: int | None = None,
) -> tuple[np.ndarray, float]:
    """Best-improvement passes until no swap strictly lowers the cost.

    All M(M-1)/2 swaps are scored per pass; the best strictly improving
    one is applied.  Ties go to the lowest (i, j) pair.  With
    max_pass_pairs set, only swaps among the points with the largest
    information deficit are scored (approximate, for large M).
    """
    current = cost(Labeling(m_bits, words))
    while True:
        best_cost = current
        best_pair = None
        for i, j in _pass_pairs(words, m_bits, cost, max_pass_pairs):
            cand = cost(Labeling(m_bits, _swapped(words, i, j)))
            if cand < best_cost - 1e-15:
                best_cost = cand
                best_pair = (i, j)
        if best_pair is None:
            return words, current
        words = _swapped(words, *best_pair)
        current = best_cost


def _run_restart(args) -> tuple[int, np.ndarray, float]:
    r, points, name, snr, samples, cost_seed, seed = args
    base = Constellation(name, points)
    cost = gmi_cost(base, snr, samples=samples, seed=cost_seed)
    init = rng.permutation(seed, (rng.TAG_LABELING, 2, r), points.shape[0]).astype(np.int64)
    words, final = _local_search(init, int(np.log2(points.shape[0])), cost)
    return r, words, final


def bsa_optimize(
    base: Constellation,
    cost: Callable[[Labeling], float],
    restarts: int = 300,
    seed: int = 0,
    target_snr: SnrPoint | None = None,
) -> BsaRun:
    """Run the swap search from ``restarts`` random initial labelings.

    Restart r draws its initial bijection from substream (seed, r); the
    lowest final cost wins, ties broken by the lowest restart index.
    """
    m_points = base.size
    m_bits = int(np.log2(m_points))
    if (1 << m_bits) != m_points:
        raise ValueError("constellation size must be a power of two")
    finals = np.empty(restarts, dtype=np.float64)
    best_words = None
    best_cost = np.inf
    for r in range(restarts):
        init = rng.permutation(seed, (rng.TAG_LABELING, 2, r), m_points).astype(np.int64)
        words, final = _local_search(init, m_bits, cost)
        finals[r] = final
        if final < best_cost - 1e-15:
            best_cost = final
            best_words = words
    snr = target_snr if target_snr is not None else _unit_snr(m_bits)
    return BsaRun(
        best_labeling=Labeling(m_bits, best_words),
        best_cost=float(best_cost),
        restarts=restarts,
        target_snr=snr,
        seed=seed,
        trajectory=finals,
    )


def bsa_optimize_gmi(
    base: Constellation,
    snr: SnrPoint,
    samples: int = 20000,
    cost_seed: int = 0,
    restarts: int = 300,
    seed: int = 0,
    workers: int | None = None,
) -> BsaRun:
    """bsa_optimize against the frozen-sample GMI cost, restarts in parallel.

    Identical to the serial path for any worker count: restart results
    are reduced in restart order.
    """
    c = normalize_energy(base)
    tasks = [
        (r, c.points, c.name, snr, samples, cost_seed, seed) for r in range(restarts)
    ]
    results = ordered_map(_run_restart, tasks, workers=workers)
    finals = np.empty(restarts, dtype=np.float64)
    best_words = None
    best_cost = np.inf
    for r, words, final in results:
        finals[r] = final
        if final < best_cost - 1e-15:
            best_cost = final
            best_words = words
    m_bits = int(np.log2(c.size))
    return BsaRun(
        best_labeling=Labeling(m_bits, best_words),
        best_cost=float(best_cost),
        restarts=restarts,
        target_snr=snr,
        seed=seed,
        trajectory=finals,
    )


def _unit_snr(m_bits: int) -> SnrPoint:
    return SnrPoint(es=1.0, n0=1.0, gamma=1.0, eta=float(m_bits), ebn0=1.0 / m_bits)


def labeled(base: Constellation, run: BsaRun) -> LabeledConstellation:
    return LabeledConstellation(normalize_energy(base), run.best_labeling)
