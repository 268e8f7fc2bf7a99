"""Rate sweeps, coded sweeps, and metric-collapse analysis.

Grid points and frame batches fan out to a process pool; every task
derives its substreams from (master seed, task indices) and results are
assembled in grid order, so output CSVs are byte-identical for any
worker count.  CSV columns are fixed and documented here; the readers
in this module parse exactly what the writers emit.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import rng
from .channel import snr_point
from .geometry import LabeledConstellation
from .ldpc import LdpcCode, make_interleaver, merge_results, run_coded_frames
from .parallel import ordered_map
from .rates import RateEstimate, capacity_awgn4, gmi_gh_product, gmi_mc, mi_gh_product, mi_mc

FRAME_BATCH = 32

RATE_SWEEP_BASE_COLUMNS = [
    "system",
    "m_bits",
    "snr_db",
    "capacity",
    "mi",
    "mi_stderr",
    "gmi",
    "gmi_stderr",
    "ebn0_mi_db",
    "ebn0_gmi_db",
    "method",
    "samples_or_nodes",
    "seed",
]

CODED_SWEEP_COLUMNS = [
    "system",
    "rate_label",
    "code_n",
    "code_k",
    "m_bits",
    "eta_bits",
    "snr_db",
    "ebn0_db",
    "frames",
    "bit_errors",
    "ber_pos",
    "avg_iterations",
    "prefec_bit_errors",
    "prefec_bits",
    "ber_pre",
    "mi",
    "mi_stderr",
    "gmi",
    "gmi_stderr",
    "metric_method",
    "stop_reason",
    "seed",
]

COLLAPSE_COLUMNS = ["rate_label", "metric", "system", "value", "status"]

COLLAPSE_METRICS = ("snr", "berpre", "mi", "gmi")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str | Path, columns: list[str], rows: list[dict]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path) -> list[dict]:
    """Read a CSV written by this module; numeric fields become floats."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for key, val in raw.items():
                try:
                    row[key] = float(val)
                except (TypeError, ValueError):
                    row[key] = val
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# rate sweeps


def _rates_at(
    lc: LabeledConstellation, snr_db: float, method: str, samples: int, nodes: int,
    seed: int, salt: int,
) -> tuple[RateEstimate, RateEstimate, str]:
    snr = snr_point(snr_db, eta=float(lc.m))
    use_gh = method == "gh" or (method == "auto" and lc.per_dim_bits is not None)
    if use_gh:
        mi = mi_gh_product(lc.constellation, snr, nodes)
        gmi = gmi_gh_product(lc, snr, nodes)
        return mi, gmi, "gh"
    mi = mi_mc(lc.constellation, snr, samples, seed, salt)
    gmi = gmi_mc(lc, snr, samples, seed, salt)
    return mi, gmi, "mc"


def _rate_point(task) -> dict:
    lc, snr_db, method, samples, nodes, seed, salt = task
    mi, gmi, used = _rates_at(lc, snr_db, method, samples, nodes, seed, salt)
    gamma = 10.0 ** (snr_db / 10.0)
    row = {
        "system": lc.name,
        "m_bits": lc.m,
        "snr_db": float(snr_db),
        "capacity": capacity_awgn4(gamma),
        "mi": mi.value,
        "mi_stderr": mi.std_error,
        "gmi": gmi.value,
        "gmi_stderr": gmi.std_error,
        "ebn0_mi_db": float(snr_db - 10.0 * np.log10(mi.value)) if mi.value > 0 else float("nan"),
        "ebn0_gmi_db": float(snr_db - 10.0 * np.log10(gmi.value)) if gmi.value > 0 else float("nan"),
        "method": used,
        "samples_or_nodes": nodes if used == "gh" else samples,
        "seed": seed,
    }
    for k in range(lc.m):
        row[f"bit_mi_{k}"] = float(gmi.per_bit[k]) if gmi.per_bit is not None else float("nan")
    return row


def rate_sweep(
    lc: LabeledConstellation,
    snr_grid_db: np.ndarray,
    method: str = "auto",
    samples: int = 100_000,
    nodes: int = 20,
    seed: int = 0,
    crn: bool = True,
    workers: int | None = None,
) -> tuple[list[str], list[dict]]:
    """MI/GMI/capacity rows over an increasing SNR grid."""
    grid = np.asarray(snr_grid_db, dtype=np.float64)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("SNR grid must be strictly increasing and nonempty")
    salt = 0 if crn else zlib.crc32(lc.name.encode()) + 1
    tasks = [(lc, g, method, samples, nodes, seed, salt) for g in grid]
    rows = ordered_map(_rate_point, tasks, workers=workers)
    columns = RATE_SWEEP_BASE_COLUMNS + [f"bit_mi_{k}" for k in range(lc.m)]
    return columns, rows


def emit_gnuplot_rate(csv_path: str | Path) -> Path:
    """Companion gnuplot script plotting MI/GMI/capacity against SNR."""
    csv_path = Path(csv_path)
    out = csv_path.with_suffix(".gp")
    text = "\n".join(
        [
            f'# gnuplot companion for {csv_path.name}',
            'set datafile separator ","',
            "set key left top",
            'set xlabel "SNR [dB]"',
            'set ylabel "bits per 4D symbol"',
            f'plot "{csv_path.name}" using 3:4 every ::1 with lines title "capacity", \\',
            f'     "{csv_path.name}" using 3:5 every ::1 with linespoints title "MI", \\',
            f'     "{csv_path.name}" using 3:7 every ::1 with linespoints title "GMI"',
            "pause -1",
        ]
    )
    out.write_text(text + "\n")
    return out


# ---------------------------------------------------------------------------
# GMI-anchored SNR location


def gmi_threshold_snr(
    lc: LabeledConstellation,
    eta: float,
    samples: int = 200_000,
    seed: int = 0,
    lo_db: float = -6.0,
    hi_db: float = 30.0,
    tol_db: float = 0.01,
) -> float:
    """SNR (dB) where the system's GMI equals eta, by bisection."""

    def value(g_db: float) -> float:
        mi_est, gmi_est, _ = _rates_at(lc, g_db, "auto", samples, 20, seed, 0)
        return gmi_est.value

    lo, hi = lo_db, hi_db
    if value(lo) > eta or value(hi) < eta:
        raise ValueError(f"eta={eta} not bracketed in [{lo_db}, {hi_db}] dB")
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if value(mid) < eta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# coded sweeps


@dataclass(frozen=True)
class CodeSpec:
    """Either a Gallager degree pair at a nominal rate, or an alist path."""

    kind: str  # "gallager" | "alist"
    n: int = 0
    wc: int = 0
    wr: int = 0
    path: str = ""
    label: str = ""

    def build(self, seed: int) -> LdpcCode:
        from . import ldpc

        if self.kind == "gallager":
            return ldpc.gallager_regular(self.n, self.wc, self.wr, seed)
        return ldpc.from_alist(self.path)


def rate_to_degrees(rate: Fraction) -> tuple[int, int]:
    """Degree pair (wc, wr) of a regular code with the nominal rate.

    1 - wc/wr = rate requires wr = wc / (1 - rate) to be an integer;
    column weight 3 is preferred, then 2, then 4..6.
    """
    for wc in (3, 2, 4, 5, 6):
        wr = Fraction(wc, 1) / (1 - rate)
        if wr.denominator == 1 and wr >= 2:
            return wc, int(wr)
    raise ValueError(f"no regular degree pair for rate {rate}")


def _coded_point(task) -> dict:
    (lc, spec, code_seed, imap, snr_db, point_seed, target_errors, max_frames, max_iter,
     metric_samples, metric_seed, rate_label, sweep_seed) = task
    code = spec.build(code_seed)  # cached per process
    eta = code.rate * lc.m
    snr = snr_point(snr_db, eta=eta)
    parts = []
    frames_done = 0
    errors = 0
    stop = "max_frames"
    while frames_done < max_frames:
        batch = min(FRAME_BATCH, max_frames - frames_done)
        parts.append(
            run_coded_frames(
                lc, code, imap, snr, point_seed,
                frames=batch, max_iter=max_iter, first_frame=frames_done,
            )
        )
        frames_done += batch
        errors += parts[-1].bit_errors
        if errors >= target_errors:
            stop = "target_errors"
            break
    result = merge_results(parts, code.k, stop_reason=stop)
    mi, gmi, used = _rates_at(lc, snr_db, "auto", metric_samples, 20, metric_seed, 0)
    return {
        "system": lc.name,
        "rate_label": rate_label,
        "code_n": code.n,
        "code_k": code.k,
        "m_bits": lc.m,
        "eta_bits": float(eta),
        "snr_db": float(snr_db),
        "ebn0_db": float(snr_db - 10.0 * np.log10(eta)),
        "frames": result.frames,
        "bit_errors": result.bit_errors,
        "ber_pos": result.ber_pos,
        "avg_iterations": result.avg_iterations,
        "prefec_bit_errors": result.prefec_bit_errors,
        "prefec_bits": result.prefec_bits,
        "ber_pre": result.ber_pre,
        "mi": mi.value,
        "mi_stderr": mi.std_error,
        "gmi": gmi.value,
        "gmi_stderr": gmi.std_error,
        "metric_method": used,
        "stop_reason": result.stop_reason,
        "seed": sweep_seed,
    }


def coded_sweep(
    lc: LabeledConstellation,
    code_specs: list[tuple[str, CodeSpec]],
    snr_grids_db: list[np.ndarray],
    seed: int = 0,
    target_errors: int = 100,
    max_frames: int = 200,
    max_iter: int = 50,
    metric_samples: int = 1_000_000,
    workers: int | None = None,
    combo_offset: int = 0,
) -> tuple[list[str], list[dict]]:
    """Post-FEC BER rows for each (code, SNR) pair of one system.

    code_specs pairs a rate label with a CodeSpec; snr_grids_db gives
    one increasing grid per code.  Point (i, j) derives its frame
    substreams from (seed, combo_offset + i, j) only.
    """
    tasks = []
    for ci, ((label, spec), grid) in enumerate(zip(code_specs, snr_grids_db)):
        code_seed = rng.mix_seed(seed, rng.TAG_LDPC, combo_offset + ci)
        code = spec.build(code_seed)
        imap = make_interleaver(
            _padded_length(code.n, lc.m), lc.m, rng.mix_seed(seed, rng.TAG_PERMUTATION, combo_offset + ci)
        )
        for pj, snr_db in enumerate(np.asarray(grid, dtype=np.float64)):
            point_seed = rng.mix_seed(seed, 101, combo_offset + ci, pj)
            tasks.append(
                (lc, spec, code_seed, imap, float(snr_db), point_seed, target_errors,
                 max_frames, max_iter, metric_samples, seed, label, seed)
            )
    rows = ordered_map(_coded_point, tasks, workers=workers)
    return CODED_SWEEP_COLUMNS, rows


def _padded_length(n: int, m: int) -> int:
    return n + (-n) % m


# ---------------------------------------------------------------------------
# collapse analysis


def metric_value(row: dict, metric: str) -> float:
    if metric == "snr":
        return float(row["snr_db"])
    if metric == "berpre":
        return float(row["ber_pre"])
    if metric == "mi":
        return float(row["mi"]) / float(row["m_bits"])
    if metric == "gmi":
        return float(row["gmi"]) / float(row["m_bits"])
    raise ValueError(f"unknown metric {metric!r}")


def threshold_at_target(
    rows: list[dict], metric: str, target_ber_pos: float
) -> tuple[float, str]:
    """Metric value where ber_pos crosses the target.

    Interpolation is linear in the metric against log10(ber_pos),
    between the bracketing pair of adjacent SNR-grid rows.  Returns
    (value, status); status is "ok" or "no-bracket".
    """
    rows = sorted(rows, key=lambda r: float(r["snr_db"]))
    t = np.log10(target_ber_pos)
    for a, b in zip(rows, rows[1:]):
        pa, pb = float(a["ber_pos"]), float(b["ber_pos"])
        if pa <= 0 or pb <= 0:
            continue
        la, lb = np.log10(pa), np.log10(pb)
        if (la - t) * (lb - t) <= 0 and la != lb:
            xa, xb = metric_value(a, metric), metric_value(b, metric)
            return float(xa + (xb - xa) * (t - la) / (lb - la)), "ok"
    return float("nan"), "no-bracket"


def collapse(
    rows: list[dict], target_ber_pos: float, metrics: tuple[str, ...] = COLLAPSE_METRICS
) -> tuple[list[dict], dict[str, float]]:
    """Per (rate, system, metric) thresholds, per (rate, metric) spreads,
    and the total spread per metric (the collapse ranking)."""
    groups: dict[tuple[str, str], list[dict]] = {}
    for row in rows:
        groups.setdefault((str(row["rate_label"]), str(row["system"])), []).append(row)
    rates = sorted({k[0] for k in groups})
    out_rows: list[dict] = []
    totals = {metric: 0.0 for metric in metrics}
    for rate in rates:
        for metric in metrics:
            values = []
            for (r, system), g in sorted(groups.items()):
                if r != rate:
                    continue
                value, status = threshold_at_target(g, metric, target_ber_pos)
                out_rows.append(
                    {"rate_label": rate, "metric": metric, "system": system,
                     "value": value, "status": status}
                )
                if status == "ok":
                    values.append(value)
            spread = float(max(values) - min(values)) if len(values) >= 2 else float("nan")
            out_rows.append(
                {"rate_label": rate, "metric": metric, "system": "(spread)",
                 "value": spread, "status": "ok" if values else "empty"}
            )
            if np.isfinite(spread):
                totals[metric] += spread
    return out_rows, totals
