"""Binary LDPC coded chain: construction, encoding, interleaving,
flooding sum-product decoding, and post-FEC BER measurement.

Parity-check matrices come from a seeded Gallager-style regular
construction or from alist files.  Encoding is systematic up to the
column-pivot permutation found by GF(2) elimination (bit-packed, so
block lengths of ~10^4 stay fast).  The decoder uses the tanh-rule
flooding schedule; in batched decoding every frame is frozen at its
first zero-syndrome iteration, which makes batched and one-at-a-time
decoding produce identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import rng
from .channel import SnrPoint, SymbolBlock, transmit
from .demapper import LlrConvention, exact_llrs, hard_decisions, maxlog_llrs
from .geometry import LabeledConstellation

LLR_SATURATION = 25.0
_MSG_CLIP = 30.0


class AlistFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# ---------------------------------------------------------------------------
# bit-packed GF(2) elimination


def _pack_rows(h: sp.csr_matrix) -> np.ndarray:
    m, n = h.shape
    words = (n + 63) // 64
    packed = np.zeros((m, words), dtype=np.uint64)
    coo = h.tocoo()
    np.bitwise_or.at(
        packed,
        (coo.row, coo.col >> 6),
        np.uint64(1) << (coo.col & 63).astype(np.uint64),
    )
    return packed


def _gf2_rref(packed: np.ndarray, n: int) -> tuple[list[int], np.ndarray]:
    """In-place reduced row echelon form; returns pivot columns."""
    m = packed.shape[0]
    pivots: list[int] = []
    r = 0
    for col in range(n):
        w, b = col >> 6, col & 63
        bit = np.uint64(1) << np.uint64(b)
        lead = np.nonzero(packed[r:, w] & bit)[0]
        if lead.size == 0:
            continue
        piv = r + int(lead[0])
        if piv != r:
            packed[[r, piv]] = packed[[piv, r]]
        sel = (packed[:, w] & bit) != 0
        sel[r] = False
        packed[sel] ^= packed[r]
        pivots.append(col)
        r += 1
        if r == m:
            break
    return pivots, packed


def gf2_rank(h: sp.csr_matrix) -> int:
    pivots, _ = _gf2_rref(_pack_rows(h), h.shape[1])
    return len(pivots)


# ---------------------------------------------------------------------------
# code object


@dataclass(frozen=True)
class LdpcCode:
    """Sparse parity-check matrix plus derived encoder/decoder state.

    ``info_positions`` are the codeword positions that carry information
    bits (the non-pivot columns of the GF(2) elimination); the remaining
    positions are parity, each determined by the stored dependency
    matrix.
    """

    h: sp.csr_matrix
    n: int = field(init=False)
    k: int = field(init=False)
    rate: float = field(init=False)

    def __post_init__(self):
        h = sp.csr_matrix(self.h, dtype=np.uint8)
        h.eliminate_zeros()
        object.__setattr__(self, "h", h)
        m, n = h.shape
        pivots, rref = _gf2_rref(_pack_rows(h), n)
        r = len(pivots)
        k = n - r
        if not 0 < k < n:
            raise ValueError(f"degenerate code: n={n}, rank={r}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "rate", k / n)
        pivot_cols = np.array(pivots, dtype=np.int64)
        free_mask = np.ones(n, dtype=bool)
        free_mask[pivot_cols] = False
        free_cols = np.nonzero(free_mask)[0]
        # parity dependency: c[pivot_i] = sum over free columns with a 1 in row i
        dep = np.zeros((r, k), dtype=np.uint8)
        for j, f in enumerate(free_cols):
            dep[:, j] = (rref[:r, f >> 6] >> np.uint64(f & 63)).astype(np.uint8) & 1
        object.__setattr__(self, "_pivot_cols", pivot_cols)
        object.__setattr__(self, "_free_cols", free_cols)
        object.__setattr__(self, "_dep", dep)
        object.__setattr__(self, "_edges", None)

    @property
    def info_positions(self) -> np.ndarray:
        return self._free_cols

    def encode(self, info_bits: np.ndarray) -> np.ndarray:
        """Map k info bits (or a (k, B) batch) to valid codewords."""
        info = np.asarray(info_bits, dtype=np.uint8)
        single = info.ndim == 1
        if single:
            info = info[:, None]
        if info.shape[0] != self.k:
            raise ValueError(f"expected {self.k} info bits, got {info.shape[0]}")
        cw = np.zeros((self.n, info.shape[1]), dtype=np.uint8)
        cw[self._free_cols] = info
        # uint8 matmul wraps mod 256, which preserves parity
        cw[self._pivot_cols] = (self._dep @ info) & 1
        return cw[:, 0] if single else cw

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        return (self.h @ bits) % 2

    def edges(self):
        """Cached edge arrays for the flooding decoder."""
        if self._edges is None:
            coo = self.h.tocoo()
            order_c = np.lexsort((coo.col, coo.row))
            ce_chk = coo.row[order_c].astype(np.int64)
            ce_var = coo.col[order_c].astype(np.int64)
            chk_ptr = np.searchsorted(ce_chk, np.arange(self.h.shape[0]))
            order_v = np.lexsort((ce_chk, ce_var))
            var_ptr = np.searchsorted(ce_var[order_v], np.arange(self.n))
            object.__setattr__(self, "_edges", (ce_chk, ce_var, chk_ptr, order_v, var_ptr))
        return self._edges


@lru_cache(maxsize=16)
def gallager_regular(n: int, wc: int, wr: int, seed: int = 0) -> LdpcCode:
    """Seeded regular (wc, wr) construction with 4-cycle reduction.

    Randomly matches the n*wc column sockets to the row sockets, then
    repairs duplicate incidences by deterministic socket swaps.  Several
    candidate matrices are drawn and the one with the fewest length-4
    cycles is kept.  Deterministic given (n, wc, wr, seed).
    """
    if wc < 2:
        raise ValueError("wc must be >= 2")
    if wr < 2 or (n * wc) % wr != 0 or wr > n:
        raise ValueError(f"infeasible degree pair: n={n}, wc={wc}, wr={wr}")
    edges = n * wc
    m = edges // wr

    def build(attempt: int) -> sp.csr_matrix:
        cols = np.repeat(np.arange(n, dtype=np.int64), wc)
        perm = rng.permutation(seed, (rng.TAG_LDPC, attempt, 0), edges)
        rows = np.repeat(np.arange(m, dtype=np.int64), wr)[perm]
        swap_u = rng.uniform01(seed, (rng.TAG_LDPC, attempt, 1), 64 * max(wc * wc, 8))
        cursor = 0
        for _ in range(100):
            keys = rows * n + cols
            order = np.argsort(keys, kind="stable")
            dup = order[1:][keys[order][1:] == keys[order][:-1]]
            if dup.size == 0:
                break
            for e in dup:
                for _ in range(50):
                    if cursor >= swap_u.size:
                        swap_u = np.concatenate(
                            [swap_u, rng.uniform01(seed, (rng.TAG_LDPC, attempt, 2 + cursor), 1024)]
                        )
                    j = min(int(swap_u[cursor] * edges), edges - 1)
                    cursor += 1
                    if j == e:
                        continue
                    # swap only if it removes the duplicate without creating new ones
                    ra, rb = rows[j], rows[e]
                    if ra == rb:
                        continue
                    rows[e], rows[j] = ra, rb
                    ok = (
                        np.count_nonzero((rows == rows[e]) & (cols == cols[e])) == 1
                        and np.count_nonzero((rows == rows[j]) & (cols == cols[j])) == 1
                    )
                    if ok:
                        break
                    rows[e], rows[j] = rb, ra
        else:
            raise ValueError("could not realize a simple graph; degree pair too dense")
        h = sp.csr_matrix(
            (np.ones(edges, dtype=np.uint8), (rows, cols)), shape=(m, n)
        )
        return h

    def cycles4(h: sp.csr_matrix) -> int:
        a = (h.astype(np.int64) @ h.T.astype(np.int64)).tocoo()
        off = a.row != a.col
        v = a.data[off]
        return int((v * (v - 1) // 2).sum() // 2)

    best_h, best_c = None, None
    for attempt in range(10):
        h = build(attempt)
        c4 = cycles4(h)
        if best_c is None or c4 < best_c:
            best_h, best_c = h, c4
    return LdpcCode(best_h)


# ---------------------------------------------------------------------------
# alist I/O


def to_alist(code: LdpcCode, path: str | Path) -> None:
    """Standard alist text layout (1-based indices, zero-padded lists)."""
    h = code.h.tocsc()
    m, n = code.h.shape
    col_lists = [h.indices[h.indptr[j] : h.indptr[j + 1]] + 1 for j in range(n)]
    hr = code.h.tocsr()
    row_lists = [hr.indices[hr.indptr[i] : hr.indptr[i + 1]] + 1 for i in range(m)]
    max_col = max(len(c) for c in col_lists)
    max_row = max(len(r) for r in row_lists)
    lines = [f"{n} {m}", f"{max_col} {max_row}"]
    lines.append(" ".join(str(len(c)) for c in col_lists))
    lines.append(" ".join(str(len(r)) for r in row_lists))
    for c in col_lists:
        lines.append(" ".join(map(str, list(c) + [0] * (max_col - len(c)))))
    for r in row_lists:
        lines.append(" ".join(map(str, list(r) + [0] * (max_row - len(r)))))
    Path(path).write_text("\n".join(lines) + "\n")


def from_alist(path: str | Path) -> LdpcCode:
    path = Path(path)
    tokens: list[tuple[int, list[int]]] = []
    for ln, raw in enumerate(path.read_text().splitlines(), start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            tokens.append((ln, [int(t) for t in text.split()]))
        except ValueError:
            raise AlistFormatError("non-integer token", ln) from None
    it = iter(tokens)

    def next_line(what: str) -> tuple[int, list[int]]:
        try:
            return next(it)
        except StopIteration:
            raise AlistFormatError(f"unexpected end of file, expected {what}", None) from None

    ln, hdr = next_line("n m")
    if len(hdr) != 2:
        raise AlistFormatError("expected 'n m'", ln)
    n, m = hdr
    next_line("max degrees")
    ln_cw, col_w = next_line("column weights")
    if len(col_w) != n:
        raise AlistFormatError(f"expected {n} column weights", ln_cw)
    ln_rw, row_w = next_line("row weights")
    if len(row_w) != m:
        raise AlistFormatError(f"expected {m} row weights", ln_rw)
    rows, cols = [], []
    for j in range(n):
        ln, entries = next_line(f"neighbors of column {j + 1}")
        entries = [e for e in entries if e != 0]
        if len(entries) != col_w[j]:
            raise AlistFormatError(
                f"column {j + 1} lists {len(entries)} checks, weight says {col_w[j]}", ln
            )
        for e in entries:
            if not 1 <= e <= m:
                raise AlistFormatError(f"check index {e} out of range", ln)
            rows.append(e - 1)
            cols.append(j)
    h = sp.csr_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(m, n))
    # cross-check the row lists against the column lists
    hr = h.tocsr()
    for i in range(m):
        ln, entries = next_line(f"neighbors of row {i + 1}")
        entries = sorted(e for e in entries if e != 0)
        expect = sorted(hr.indices[hr.indptr[i] : hr.indptr[i + 1]] + 1)
        if entries != list(expect):
            raise AlistFormatError(f"row {i + 1} list inconsistent with column lists", ln)
    return LdpcCode(h)


# ---------------------------------------------------------------------------
# interleaver


@dataclass(frozen=True)
class InterleaverMap:
    """Random permutation of n bit positions, assigned cyclically to m
    streams of ns symbols: permuted position j maps to stream j mod m of
    symbol j // m."""

    n: int
    m: int
    perm: np.ndarray
    seed: int

    def __post_init__(self):
        if self.n % self.m != 0:
            raise ValueError("n must be divisible by m (pad the frame first)")
        p = np.asarray(self.perm, dtype=np.int64)
        if not np.array_equal(np.sort(p), np.arange(self.n)):
            raise ValueError("perm is not a permutation of range(n)")
        object.__setattr__(self, "perm", p)

    @property
    def ns(self) -> int:
        return self.n // self.m


def make_interleaver(n: int, m: int, seed: int) -> InterleaverMap:
    return InterleaverMap(n=n, m=m, perm=rng.permutation(seed, (rng.TAG_PERMUTATION,), n), seed=seed)


def interleave(codeword: np.ndarray, imap: InterleaverMap) -> np.ndarray:
    cw = np.asarray(codeword)
    if cw.shape[0] != imap.n:
        raise ValueError(f"expected {imap.n} bits, got {cw.shape[0]}")
    return cw[imap.perm].reshape(imap.ns, imap.m)


def deinterleave(llr_matrix: np.ndarray, imap: InterleaverMap) -> np.ndarray:
    mat = np.asarray(llr_matrix)
    if mat.shape != (imap.ns, imap.m):
        raise ValueError(f"expected shape {(imap.ns, imap.m)}, got {mat.shape}")
    out = np.empty(imap.n, dtype=mat.dtype)
    out[imap.perm] = mat.reshape(-1)
    return out


# ---------------------------------------------------------------------------
# sum-product decoding


def _decode_batch(
    code: LdpcCode, llr_dec: np.ndarray, max_iter: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flooding sum-product on (n, B) decoder-convention LLRs.

    Decoder convention: positive LLR favors bit 0.  Each frame's output
    is frozen at its first zero-syndrome iteration.  A frame whose
    posterior is identically zero carries no decision and is never
    declared converged.
    """
    ce_chk, ce_var, chk_ptr, order_v, var_ptr = code.edges()
    n, B = llr_dec.shape
    v2c = llr_dec[ce_var, :].copy()
    result = (llr_dec < 0).astype(np.uint8)
    iterations = np.full(B, max_iter, dtype=np.int64)
    converged = np.zeros(B, dtype=bool)
    for it in range(1, max_iter + 1):
        t = np.tanh(np.clip(v2c, -_MSG_CLIP, _MSG_CLIP) / 2.0)
        s = np.where(t < 0, -1.0, 1.0)
        a = np.clip(np.abs(t), 1e-300, 1.0)
        la = np.log(a)
        sum_la = np.add.reduceat(la, chk_ptr, axis=0)
        neg = np.add.reduceat((t < 0).astype(np.int8), chk_ptr, axis=0)
        total_sign = 1.0 - 2.0 * (neg % 2)
        ex_mag = np.exp(np.minimum(sum_la[ce_chk, :] - la, 0.0))
        np.clip(ex_mag, None, 1.0 - 1e-15, out=ex_mag)
        c2v = (total_sign[ce_chk, :] * s) * (2.0 * np.arctanh(ex_mag))
        sum_c2v = np.add.reduceat(c2v[order_v, :], var_ptr, axis=0)
        posterior = llr_dec + sum_c2v
        v2c = posterior[ce_var, :] - c2v
        hard = (posterior < 0).astype(np.uint8)
        syndrome_ok = ~(
            (np.add.reduceat(hard[ce_var, :], chk_ptr, axis=0) % 2).any(axis=0)
        )
        informative = np.abs(posterior).max(axis=0) > 0
        newly = syndrome_ok & informative & ~converged
        if newly.any():
            result[:, newly] = hard[:, newly]
            iterations[newly] = it
            converged |= newly
        if converged.all():
            break
        if it == max_iter:
            result[:, ~converged] = hard[:, ~converged]
    return result, iterations, converged


def decode_sumproduct(
    code: LdpcCode,
    llrs: np.ndarray,
    max_iter: int = 50,
    convention: LlrConvention = LlrConvention.ONE_OVER_ZERO,
) -> tuple[np.ndarray, int, bool]:
    """Decode one frame; returns (bits, iterations, converged).

    Input LLRs follow the demapper convention (default: positive LLR
    favors bit 1); the sign flip to the decoder-internal convention is
    applied here.
    """
    lam = np.asarray(llrs, dtype=np.float64).reshape(-1)
    if lam.shape[0] != code.n:
        raise ValueError(f"expected {code.n} LLRs, got {lam.shape[0]}")
    llr_dec = -lam if convention is LlrConvention.ONE_OVER_ZERO else lam
    bits, iters, conv = _decode_batch(code, llr_dec[:, None], max_iter)
    return bits[:, 0], int(iters[0]), bool(conv[0])


# ---------------------------------------------------------------------------
# full coded chain


@dataclass(frozen=True)
class PostFecResult:
    ber_pos: float
    frames: int
    bit_errors: int
    avg_iterations: float
    prefec_bit_errors: int = 0
    prefec_bits: int = 0
    stop_reason: str = ""

    @property
    def ber_pre(self) -> float:
        return self.prefec_bit_errors / self.prefec_bits if self.prefec_bits else float("nan")


def _frame_seed(master_seed: int, frame_index: int) -> int:
    return rng.mix_seed(master_seed, rng.TAG_LDPC, frame_index)


def run_coded_frames(
    lc: LabeledConstellation,
    code: LdpcCode,
    imap: InterleaverMap,
    snr: SnrPoint,
    seed: int,
    frames: int,
    max_iter: int = 50,
    first_frame: int = 0,
    prefec_on_exact: bool = False,
) -> PostFecResult:
    """Encode, map, transmit, demap, and decode a run of frames.

    Frame f uses substreams derived from (seed, first_frame + f), so any
    batching or parallel split over frames reproduces the same counts.
    Pad bits (when the code length is not a multiple of m) are known
    zeros; they are stripped before decoding.  The decoder always sees
    exact LLRs; the pre-FEC BER tally uses max-log hard decisions (the
    standard definition) unless prefec_on_exact is set.
    """
    m = lc.m
    n_pad = imap.n
    pad = n_pad - code.n
    if pad < 0 or pad >= m:
        raise ValueError(f"interleaver length {n_pad} incompatible with n={code.n}, m={m}")
    points = lc.constellation.points
    word_of_bits = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    prefec_errors = 0
    llr_cols = np.empty((code.n, frames), dtype=np.float64)
    infos = np.empty((code.k, frames), dtype=np.uint8)
    for f in range(frames):
        fseed = _frame_seed(seed, first_frame + f)
        info = rng.bits(fseed, (rng.TAG_INFO_BITS,), code.k)
        infos[:, f] = info
        cw = code.encode(info)
        if pad:
            cw = np.concatenate([cw, np.zeros(pad, dtype=np.uint8)])
        bit_mat = interleave(cw, imap)
        words = bit_mat.astype(np.int64) @ word_of_bits
        idx = lc.labeling.index_of_word[words]
        block = SymbolBlock(symbols=points[idx], source_indices=idx)
        received = transmit(block, snr, fseed)
        llr_block = exact_llrs(received, lc, snr, true_bits=bit_mat)
        if prefec_on_exact:
            hard = hard_decisions(llr_block)
        else:
            hard = hard_decisions(maxlog_llrs(received, lc, snr, true_bits=bit_mat))
        prefec_errors += int(np.count_nonzero(hard != bit_mat))
        llr_flat = deinterleave(llr_block.llrs, imap)
        llr_cols[:, f] = llr_flat[: code.n]
    decoded, iters, _ = _decode_batch(code, -llr_cols, max_iter)
    info_errors = int(np.count_nonzero(decoded[code.info_positions, :] != infos))
    iter_sum = int(iters.sum())
    return PostFecResult(
        ber_pos=info_errors / (frames * code.k),
        frames=frames,
        bit_errors=info_errors,
        avg_iterations=iter_sum / frames,
        prefec_bit_errors=prefec_errors,
        prefec_bits=frames * n_pad,
        stop_reason="",
    )


def run_coded_frame(
    lc: LabeledConstellation,
    code: LdpcCode,
    imap: InterleaverMap,
    snr: SnrPoint,
    seed: int,
    max_iter: int = 50,
) -> PostFecResult:
    """Single-frame contribution to a post-FEC BER measurement."""
    return run_coded_frames(lc, code, imap, snr, seed, frames=1, max_iter=max_iter)


def merge_results(parts: list[PostFecResult], k: int, stop_reason: str = "") -> PostFecResult:
    """Order-independent aggregation of per-batch frame counts."""
    frames = sum(p.frames for p in parts)
    errors = sum(p.bit_errors for p in parts)
    iter_sum = sum(p.avg_iterations * p.frames for p in parts)
    return PostFecResult(
        ber_pos=errors / (frames * k) if frames else float("nan"),
        frames=frames,
        bit_errors=errors,
        avg_iterations=iter_sum / frames if frames else 0.0,
        prefec_bit_errors=sum(p.prefec_bit_errors for p in parts),
        prefec_bits=sum(p.prefec_bits for p in parts),
        stop_reason=stop_reason,
    )
