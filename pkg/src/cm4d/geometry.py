"""4D constellations and binary labelings.

Constellations are ordered sets of points in real 4-space with cached
average symbol energy.  Labelings are bijections between point indices
and m-bit words; together they induce, for every bit position, the two
half-sized subsets of points carrying a 0 or a 1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import rng

DIM = 4


class ConstellationError(ValueError):
    pass


class FileFormatError(ValueError):
    """Malformed constellation/labeling file; carries a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Constellation:
    """Ordered list of M points in R^4 with cached mean energy.

    ``factors`` is set when the constellation was built as a Cartesian
    product; it stores the per-dimension amplitude levels and enables
    factorized demapping and quadrature rates.
    """

    name: str
    points: np.ndarray
    factors: tuple[np.ndarray, ...] | None = None
    es: float = field(init=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != DIM:
            raise ConstellationError(f"points must be (M, {DIM}), got {pts.shape}")
        if pts.shape[0] < 2:
            raise ConstellationError("constellation needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ConstellationError("non-finite coordinate")
        if len(np.unique(pts, axis=0)) != pts.shape[0]:
            raise ConstellationError("duplicate points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "es", float(np.mean(np.sum(pts * pts, axis=1))))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def with_name(self, name: str) -> "Constellation":
        return Constellation(name, self.points, factors=self.factors)


@dataclass(frozen=True)
class Labeling:
    """Bijection index -> m-bit word; words[i] labels point i.

    Bit position 0 is the most significant bit of the word, matching the
    convention that dimension 1 contributes the leading bits in product
    labelings.  m = 0 (single word 0) is allowed for singleton factors.
    """

    m: int
    words: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.words, dtype=np.int64))
        if self.m < 0 or w.ndim != 1 or w.shape[0] != (1 << self.m):
            raise ConstellationError(f"need 2^{self.m} words, got {w.shape}")
        if not np.array_equal(np.sort(w), np.arange(1 << self.m)):
            raise ConstellationError("words are not a permutation of 0..2^m-1")
        w.setflags(write=False)
        object.__setattr__(self, "words", w)

    @property
    def size(self) -> int:
        return self.words.shape[0]

    @cached_property
    def bits(self) -> np.ndarray:
        """(M, m) uint8 bit matrix, column 0 = MSB."""
        shifts = np.arange(self.m - 1, -1, -1, dtype=np.int64)
        return ((self.words[:, None] >> shifts[None, :]) & 1).astype(np.uint8)

    @cached_property
    def index_of_word(self) -> np.ndarray:
        inv = np.empty(self.size, dtype=np.int64)
        inv[self.words] = np.arange(self.size)
        return inv


@dataclass(frozen=True)
class LabeledConstellation:
    constellation: Constellation
    labeling: Labeling

    def __post_init__(self):
        if self.labeling.size != self.constellation.size:
            raise ConstellationError(
                f"labeling size {self.labeling.size} != M {self.constellation.size}"
            )

    @property
    def m(self) -> int:
        return self.labeling.m

    @property
    def size(self) -> int:
        return self.constellation.size

    @property
    def name(self) -> str:
        return self.constellation.name

    @cached_property
    def one_masks(self) -> np.ndarray:
        """(m, M) boolean masks: one_masks[k, i] == bit k of point i's word."""
        return self.labeling.bits.T.astype(bool)

    def subset(self, k: int, b: int) -> np.ndarray:
        """Indices of points whose bit k equals b."""
        mask = self.one_masks[k]
        return np.nonzero(mask if b == 1 else ~mask)[0]

    def normalized(self) -> "LabeledConstellation":
        return LabeledConstellation(normalize_energy(self.constellation), self.labeling)

    @cached_property
    def per_dim_bits(self) -> tuple[tuple[np.ndarray, Labeling], ...] | None:
        """Per-dimension (levels, labeling) when each bit depends on one dimension.

        Requires the constellation to be a Cartesian product (factors
        present) in lexicographic point order, and verifies against the
        actual bit matrix that every bit position is a function of a
        single dimension's level index.  Returns None if the structure
        does not hold.
        """
        c = self.constellation
        if c.factors is None:
            return None
        sizes = [len(f) for f in c.factors]
        if int(np.prod(sizes)) != c.size:
            return None
        # level index of each point in each dimension under lexicographic order
        idx = np.arange(c.size)
        level_idx = []
        for d in reversed(range(DIM)):
            level_idx.append(idx % sizes[d])
            idx = idx // sizes[d]
        level_idx = level_idx[::-1]
        bits = self.labeling.bits
        out: list[tuple[np.ndarray, Labeling]] = []
        bit_cursor = 0
        for d in range(DIM):
            md = int(np.log2(sizes[d]))
            if (1 << md) != sizes[d]:
                return None
            words = np.zeros(sizes[d], dtype=np.int64)
            for j in range(md):
                col = bits[:, bit_cursor + j].astype(np.int64)
                ones = np.zeros(sizes[d], dtype=np.int64)
                counts = np.zeros(sizes[d], dtype=np.int64)
                np.add.at(ones, level_idx[d], col)
                np.add.at(counts, level_idx[d], 1)
                # bit must be constant on every level of this dimension
                if not np.all((ones == 0) | (ones == counts)):
                    return None
                words |= (ones == counts).astype(np.int64) << (md - 1 - j)
            try:
                out.append((np.asarray(c.factors[d], dtype=np.float64), Labeling(md, words)))
            except ConstellationError:
                return None
            bit_cursor += md
        if bit_cursor != self.m:
            return None
        return tuple(out)


# ---------------------------------------------------------------------------
# constructors


def pam_points(levels: int) -> np.ndarray:
    """Equally spaced PAM amplitudes {-(L-1), ..., L-1}, spacing 2."""
    if levels < 2 or levels & (levels - 1):
        raise ConstellationError(f"levels must be a power of two >= 2, got {levels}")
    return np.arange(-(levels - 1), levels, 2, dtype=np.float64)


def product_constellation(per_dim: list[np.ndarray] | tuple, name: str) -> Constellation:
    """Cartesian product of four per-dimension amplitude lists.

    Point order is lexicographic with dimension 1 most significant.
    """
    if len(per_dim) != DIM:
        raise ConstellationError(f"need {DIM} per-dimension lists")
    levels = []
    for d, lv in enumerate(per_dim):
        a = np.asarray(lv, dtype=np.float64).ravel()
        if a.size == 0 or len(np.unique(a)) != a.size:
            raise ConstellationError(f"dimension {d + 1}: empty or duplicate levels")
        levels.append(a)
    grids = np.meshgrid(*levels, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    return Constellation(name, pts, factors=tuple(levels))


def _canonical_order(pts_int: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    # sort by squared norm, then lexicographically; exact in integers
    return sorted(pts_int, key=lambda p: (sum(x * x for x in p), p))


def d4_odd_shells(max_norm_sq: int) -> Constellation:
    """Integer points with odd coordinate sum and squared norm <= max_norm_sq.

    These are the shells of the checkerboard lattice's odd-sum coset,
    centered on a lattice hole; max_norm_sq=1 gives PS-QPSK and
    max_norm_sq=9 gives the 256-point construction.
    """
    if max_norm_sq < 1:
        raise ConstellationError("max_norm_sq must be >= 1")
    r = int(np.floor(np.sqrt(max_norm_sq)))
    pts = [
        p
        for p in itertools.product(range(-r, r + 1), repeat=DIM)
        if sum(p) % 2 == 1 and sum(x * x for x in p) <= max_norm_sq
    ]
    pts = _canonical_order(pts)
    return Constellation(f"d4-odd<= {max_norm_sq}".replace(" ", ""), np.array(pts, dtype=np.float64))


def d4_subset(m_points: int) -> Constellation:
    """The m_points lowest-norm points of the odd-sum coset, canonical tie-break.

    A deterministic stand-in where an externally optimized large
    constellation is unavailable; deliberately named after its own
    construction.
    """
    if m_points < 2:
        raise ConstellationError("need at least 2 points")
    norm_sq = 1
    while True:
        pts = [
            p
            for p in itertools.product(
                range(-int(np.sqrt(norm_sq)) - 1, int(np.sqrt(norm_sq)) + 2), repeat=DIM
            )
            if sum(p) % 2 == 1 and sum(x * x for x in p) <= norm_sq
        ]
        if len(pts) >= m_points:
            break
        norm_sq += 2
    pts = _canonical_order(pts)[:m_points]
    return Constellation(f"d4-subset-{m_points}", np.array(pts, dtype=np.float64))


def so_pm_qpsk() -> Constellation:
    """Subset-optimized PM-QPSK.

    The 8 even-parity sign patterns of (+-1,+-1,+-1,+-1) kept at unit
    amplitude and the 8 odd-parity patterns scaled by (sqrt(5)-1)/2,
    which equalizes the within-subset and cross-subset minimum
    distances.  Which subset is scaled is a free symmetry; the odd one
    is scaled here.
    """
    alpha = (np.sqrt(5.0) - 1.0) / 2.0
    pts = []
    for signs in itertools.product((1.0, -1.0), repeat=DIM):
        scale = 1.0 if signs.count(-1.0) % 2 == 0 else alpha
        pts.append(tuple(s * scale for s in signs))
    pts.sort(key=lambda p: (round(sum(x * x for x in p), 12), p))
    return Constellation("so-pm-qpsk", np.array(pts, dtype=np.float64))


def optimize_packing(
    m_points: int, seed: int = 0, iterations: int = 3000, restarts: int = 8
) -> Constellation:
    """Search for a max-min-distance packing at unit mean energy.

    Annealed pairwise-repulsion descent followed by a local max-min
    polish (sequential quadratic programming), repeated from random
    starts.  Deterministic given the seed.  This approximates externally
    published optimized packings; it carries no optimality guarantee.
    """
    from scipy.optimize import minimize

    if m_points < 2:
        raise ConstellationError("need at least 2 points")

    def ratio(p: np.ndarray) -> float:
        q = p - p.mean(axis=0)
        d2 = np.sum((q[:, None, :] - q[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2, np.inf)
        return float(d2.min() / np.mean(np.sum(q * q, axis=1)))

    def repel(p: np.ndarray) -> np.ndarray:
        p = p - p.mean(axis=0)
        p /= np.sqrt(np.mean(np.sum(p * p, axis=1)))
        for it in range(iterations):
            beta = 10.0 + 240.0 * it / max(iterations, 1)
            diff = p[:, None, :] - p[None, :, :]
            d2 = np.sum(diff * diff, axis=2)
            np.fill_diagonal(d2, np.inf)
            w = np.exp(-beta * (d2 - d2.min()))
            np.fill_diagonal(w, 0.0)
            g = np.sum(w[:, :, None] * diff, axis=1)
            g /= np.abs(g).max() + 1e-30
            p = p + 0.01 * g
            p -= p.mean(axis=0)
            p /= np.sqrt(np.mean(np.sum(p * p, axis=1)))
        return p

    iu = np.triu_indices(m_points, 1)

    def polish(p: np.ndarray) -> np.ndarray:
        x0 = np.concatenate([p.ravel(), [ratio(p) * 0.999]])

        def dist_margin(x):
            q = x[:-1].reshape(m_points, DIM)
            d2 = np.sum((q[:, None, :] - q[None, :, :]) ** 2, axis=2)
            return d2[iu] - x[-1]

        def energy_margin(x):
            q = x[:-1].reshape(m_points, DIM)
            return 1.0 - np.mean(np.sum(q * q, axis=1))

        res = minimize(
            lambda x: -x[-1],
            x0,
            method="SLSQP",
            constraints=[
                {"type": "ineq", "fun": dist_margin},
                {"type": "ineq", "fun": energy_margin},
            ],
            options={"maxiter": 500, "ftol": 1e-15},
        )
        return res.x[:-1].reshape(m_points, DIM)

    best, best_ratio = None, -1.0
    for r in range(restarts):
        start = rng.gaussians(seed, (rng.TAG_PACKING, r), m_points * DIM).reshape(m_points, DIM)
        cand = polish(repel(start))
        cr = ratio(cand)
        if cr > best_ratio:
            best, best_ratio = cand, cr
    best = best - best.mean(axis=0)
    best /= np.sqrt(np.mean(np.sum(best * best, axis=1)))
    order = np.lexsort(tuple(best[:, d] for d in reversed(range(DIM))) + (np.sum(best * best, axis=1),))
    return Constellation(f"packing-{m_points}", best[order])


# ---------------------------------------------------------------------------
# characterization


def normalize_energy(c: Constellation) -> Constellation:
    """Uniformly scale so the mean squared norm is exactly 1."""
    if c.es <= 0:
        raise ConstellationError("cannot normalize an all-zero constellation")
    if abs(c.es - 1.0) <= 1e-15:
        return c
    scale = 1.0 / np.sqrt(c.es)
    factors = None
    if c.factors is not None:
        factors = tuple(f * scale for f in c.factors)
    return Constellation(c.name, c.points * scale, factors=factors)


def min_sq_distance(c: Constellation) -> float:
    """Exact minimum squared pairwise distance, O(M^2) in row blocks."""
    pts = c.points
    n = pts.shape[0]
    best = np.inf
    block = max(1, min(n, 2 ** 22 // max(n, 1)))
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        d2 = np.sum((pts[lo:hi, None, :] - pts[None, :, :]) ** 2, axis=2)
        for i in range(lo, hi):
            d2[i - lo, i] = np.inf
        best = min(best, float(d2.min()))
    return best


def asymptotic_gain_db(
    c: Constellation, reference: Constellation, bits_c: int, bits_ref: int
) -> float:
    """Power-efficiency gain in dB: ratio of d^2_min per bit energy."""
    d2c = min_sq_distance(c)
    d2r = min_sq_distance(reference)
    if d2c <= 0 or d2r <= 0:
        raise ConstellationError("zero minimum distance")
    eb_c = c.es / bits_c
    eb_r = reference.es / bits_ref
    return float(10.0 * np.log10((d2c / eb_c) / (d2r / eb_r)))


# ---------------------------------------------------------------------------
# labelings


def brgc(m: int) -> Labeling:
    """Binary reflected Gray code by reflect-and-prefix."""
    if m < 1:
        raise ConstellationError("m must be >= 1")
    words = [0, 1]
    for k in range(1, m):
        words = words + [w | (1 << k) for w in reversed(words)]
    # reflect-and-prefix builds the sequence whose i-th entry is i ^ (i >> 1)
    return Labeling(m, np.array(words, dtype=np.int64))


def nbc(m: int) -> Labeling:
    """Natural binary code: word i labels point i."""
    if m < 1:
        raise ConstellationError("m must be >= 1")
    return Labeling(m, np.arange(1 << m, dtype=np.int64))


def agc2() -> Labeling:
    """Anti-Gray code for 4 amplitude levels.

    Maximizes the summed Hamming distance between labels of adjacent
    sorted levels (the maximum is 5); among the maximizers the
    lexicographically first word sequence is pinned.
    """
    return Labeling(2, np.array([0b00, 0b11, 0b01, 0b10], dtype=np.int64))


def trivial_labeling() -> Labeling:
    """m=0 labeling of a singleton factor."""
    return Labeling(0, np.array([0], dtype=np.int64))


def product_labeling(per_dim: list[Labeling] | tuple) -> Labeling:
    """Concatenate per-dimension words; dimension 1's bits most significant.

    Matches the lexicographic point order of product_constellation.
    """
    if len(per_dim) != DIM:
        raise ConstellationError(f"need {DIM} per-dimension labelings")
    m_total = sum(lab.m for lab in per_dim)
    words = np.zeros(1, dtype=np.int64)
    for lab in per_dim:
        words = (words[:, None] << lab.m | lab.words[None, :]).ravel()
    return Labeling(m_total, words)


# ---------------------------------------------------------------------------
# file formats


def save_constellation(
    path: str | Path,
    c: Constellation | LabeledConstellation,
    comments: list[str] | None = None,
) -> None:
    """Write `x1,x2,x3,x4[,label]` rows; labels as zero-padded binary."""
    lc = c if isinstance(c, LabeledConstellation) else None
    cons = lc.constellation if lc else c
    lines = [f"# {t}" for t in (comments or [])]
    for i, p in enumerate(cons.points):
        row = ",".join(repr(float(x)) for x in p)
        if lc is not None:
            row += "," + format(int(lc.labeling.words[i]), f"0{lc.m}b")
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def load_constellation(path: str | Path, name: str | None = None):
    """Read a constellation CSV; returns LabeledConstellation if a label
    column is present, else Constellation.

    Label tokens consisting only of 0/1 with length equal to log2(M) are
    parsed as binary, anything else as base-10.
    """
    path = Path(path)
    rows: list[tuple[int, list[str]]] = []
    for ln, raw in enumerate(path.read_text().splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        rows.append((ln, [t.strip() for t in text.split(",")]))
    if rows and _looks_like_header(rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise FileFormatError("no data rows", None)
    ncols = len(rows[0][1])
    if ncols not in (DIM, DIM + 1):
        raise FileFormatError(f"expected {DIM} or {DIM + 1} columns", rows[0][0])
    pts = np.empty((len(rows), DIM), dtype=np.float64)
    tokens: list[tuple[int, str]] = []
    for r, (ln, cols) in enumerate(rows):
        if len(cols) != ncols:
            raise FileFormatError(f"expected {ncols} columns, got {len(cols)}", ln)
        try:
            pts[r] = [float(t) for t in cols[:DIM]]
        except ValueError as e:
            raise FileFormatError(str(e), ln) from None
        if ncols == DIM + 1:
            tokens.append((ln, cols[DIM]))
    seen = {}
    for r, (ln, _) in enumerate(rows):
        key = pts[r].tobytes()
        if key in seen:
            raise FileFormatError(f"duplicate of point on line {seen[key]}", ln)
        seen[key] = ln
    cname = name or path.stem
    cons = Constellation(cname, pts)
    if ncols == DIM:
        return cons
    m_bits = int(np.log2(len(rows)))
    if (1 << m_bits) != len(rows):
        raise FileFormatError(
            f"label column present but {len(rows)} rows is not a power of two", rows[0][0]
        )
    words = np.empty(len(rows), dtype=np.int64)
    for r, (ln, tok) in enumerate(tokens):
        try:
            if set(tok) <= {"0", "1"} and len(tok) == m_bits:
                words[r] = int(tok, 2)
            else:
                words[r] = int(tok, 10)
        except ValueError:
            raise FileFormatError(f"bad label {tok!r}", ln) from None
    try:
        lab = Labeling(m_bits, words)
    except ConstellationError as e:
        raise FileFormatError(str(e), rows[0][0]) from None
    return LabeledConstellation(cons, lab)


def _looks_like_header(cols: list[str]) -> bool:
    for t in cols[:DIM]:
        try:
            float(t)
            return False
        except ValueError:
            pass
    return True


def save_labeling(path: str | Path, lab: Labeling, comments: list[str] | None = None) -> None:
    """One word per row, point-index order, binary text."""
    lines = [f"# {t}" for t in (comments or [])]
    lines += [format(int(w), f"0{lab.m}b") for w in lab.words]
    Path(path).write_text("\n".join(lines) + "\n")


def load_labeling(path: str | Path) -> Labeling:
    path = Path(path)
    tokens: list[tuple[int, str]] = []
    for ln, raw in enumerate(path.read_text().splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if text:
            tokens.append((ln, text))
    if not tokens:
        raise FileFormatError("no data rows", None)
    m_bits = int(np.log2(len(tokens)))
    if (1 << m_bits) != len(tokens):
        raise FileFormatError(f"{len(tokens)} rows is not a power of two", tokens[0][0])
    words = np.empty(len(tokens), dtype=np.int64)
    for i, (ln, tok) in enumerate(tokens):
        try:
            if set(tok) <= {"0", "1"} and len(tok) == m_bits:
                words[i] = int(tok, 2)
            else:
                words[i] = int(tok, 10)
        except ValueError:
            raise FileFormatError(f"bad word {tok!r}", ln) from None
    try:
        return Labeling(m_bits, words)
    except ConstellationError as e:
        raise FileFormatError(str(e), tokens[0][0]) from None
