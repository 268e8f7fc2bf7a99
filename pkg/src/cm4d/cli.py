"""Command-line harness.

Subcommands:
  catalog       list the named systems
  rate-sweep    MI/GMI/capacity over an SNR grid -> CSV (+ gnuplot script)
  coded-sweep   post-FEC BER of an LDPC chain over SNR grids -> CSV
  collapse      thresholds and spreads of post-FEC BER predictors
  labeling-opt  binary-switching labeling search -> labeling file

Exit codes: 0 success, 2 usage error, 3 data/validation error.  Flags
override values from an optional JSON config file (--config).  All
randomized commands echo their seeds; rerunning with the same seed and
any worker count reproduces output files byte for byte.  Decoder LLR
convention: positive LLR favors bit 1 (the sign flip to the decoder's
internal convention is applied internally).
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import CatalogError, DataValidationError, get_system, system_names
from .channel import snr_point
from .bsa import bsa_optimize_gmi
from .geometry import FileFormatError, save_labeling
from .parallel import WORKERS_ENV, default_workers
from .sweeps import (
    CODED_SWEEP_COLUMNS,
    COLLAPSE_COLUMNS,
    COLLAPSE_METRICS,
    CodeSpec,
    coded_sweep,
    collapse,
    emit_gnuplot_rate,
    gmi_threshold_snr,
    rate_sweep,
    rate_to_degrees,
    read_csv,
    write_csv,
)

USAGE_ERROR = 2
DATA_ERROR = 3


def _snr_grid(args) -> np.ndarray:
    if args.snr_to < args.snr_from or args.snr_step <= 0:
        raise CliUsageError("need snr-from <= snr-to and snr-step > 0")
    return np.arange(args.snr_from, args.snr_to + 1e-9, args.snr_step)


class CliUsageError(Exception):
    pass


def _resolve_system(name: str):
    try:
        return get_system(name)
    except CatalogError as e:
        if "unknown system" in str(e):
            print(f"error: {e}", file=sys.stderr)
            print("available systems:", file=sys.stderr)
            for n in system_names():
                print(f"  {n}", file=sys.stderr)
            raise SystemExit(USAGE_ERROR) from None
        raise


def cmd_catalog(args) -> int:
    for name in system_names(include_unavailable=True):
        try:
            lc = get_system(name)
            print(f"{name:18s} M={lc.size:<6d} m={lc.m}")
        except CatalogError:
            print(f"{name:18s} (needs external data file)")
    return 0


def cmd_rate_sweep(args) -> int:
    lc = _resolve_system(args.system)
    grid = _snr_grid(args)
    columns, rows = rate_sweep(
        lc, grid, method=args.method, samples=args.samples,
        nodes=args.nodes, seed=args.seed, crn=not args.no_crn, workers=args.workers,
    )
    write_csv(args.out, columns, rows)
    print(f"wrote {args.out} ({len(rows)} rows), system={lc.name} seed={args.seed}")
    if args.emit_plot:
        print(f"wrote {emit_gnuplot_rate(args.out)}")
    return 0


def _parse_rates(text: str) -> list[Fraction]:
    return [Fraction(tok.strip()) for tok in text.split(",") if tok.strip()]


def cmd_coded_sweep(args) -> int:
    lc = _resolve_system(args.system)
    specs: list[tuple[str, CodeSpec]] = []
    if args.code.startswith("alist:"):
        path = args.code.split(":", 1)[1]
        specs.append((Path(path).stem, CodeSpec(kind="alist", path=path)))
    elif args.code.startswith("gallager:"):
        n = int(args.code.split(":", 1)[1])
        for rate in _parse_rates(args.rates):
            wc, wr = rate_to_degrees(rate)
            if n % wr:
                raise CliUsageError(f"block length {n} not divisible by wr={wr} for rate {rate}")
            specs.append((str(rate), CodeSpec(kind="gallager", n=n, wc=wc, wr=wr)))
    else:
        raise CliUsageError("--code must be 'gallager:<n>' or 'alist:<path>'")
    grids = []
    for label, spec in specs:
        if args.snr_from is not None:
            grids.append(_snr_grid(args))
            continue
        # anchor the grid where the GMI meets the code's spectral efficiency
        code = spec.build(0)
        eta = code.rate * lc.m
        anchor = gmi_threshold_snr(lc, eta, seed=args.seed)
        offsets = np.array([float(t) for t in args.snr_offsets.split(",")])
        grids.append(np.round(anchor + offsets, 3))
        print(f"{lc.name} rate={label}: GMI meets eta={eta:.3f} at {anchor:.2f} dB")
    columns, rows = coded_sweep(
        lc, specs, grids, seed=args.seed, target_errors=args.target_errors,
        max_frames=args.max_frames, metric_samples=args.metric_samples, workers=args.workers,
    )
    write_csv(args.out, columns, rows)
    print(f"wrote {args.out} ({len(rows)} rows), system={lc.name} seed={args.seed}")
    return 0


def cmd_collapse(args) -> int:
    rows = []
    for path in args.inputs:
        part = read_csv(path)
        missing = [c for c in ("system", "rate_label", "snr_db", "ber_pos") if c not in part[0]]
        if missing:
            raise DataValidationError(f"{path}: missing columns {missing}")
        rows.extend(part)
    metrics = COLLAPSE_METRICS if args.metric == "all" else (args.metric,)
    out_rows, totals = collapse(rows, args.target_berpos, metrics)
    write_csv(args.out, COLLAPSE_COLUMNS, out_rows)
    print(f"wrote {args.out}")
    print(f"total spread per metric at ber_pos={args.target_berpos:g} (smaller = better predictor):")
    for metric, total in sorted(totals.items(), key=lambda kv: kv[1]):
        print(f"  {metric:8s} {total:.6f}")
    return 0


def cmd_labeling_opt(args) -> int:
    lc = _resolve_system(args.constellation)
    snr = snr_point(args.snr, eta=float(lc.m))
    run = bsa_optimize_gmi(
        lc.constellation, snr, samples=args.samples, cost_seed=args.seed,
        restarts=args.restarts, seed=args.seed, workers=args.workers,
    )
    comments = [
        f"binary-switching labeling for {lc.name}",
        f"target snr_db={args.snr} samples={args.samples} restarts={args.restarts} seed={args.seed}",
        f"cost(-gmi)={run.best_cost!r} bits/symbol={-run.best_cost!r}",
    ]
    save_labeling(args.out, run.best_labeling, comments=comments)
    print(f"wrote {args.out}: GMI {-run.best_cost:.6f} bits/symbol at {args.snr} dB, seed={args.seed}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cm4d",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("catalog", help="list named systems").set_defaults(func=cmd_catalog)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=None,
                       help=f"worker processes (default: ${WORKERS_ENV} or cpu count; now {default_workers()})")
        p.add_argument("--config", type=str, default=None,
                       help="JSON file with default values for these flags")

    p = sub.add_parser("rate-sweep", help="MI/GMI/capacity over an SNR grid")
    p.add_argument("--system", required=True)
    p.add_argument("--snr-from", type=float, required=True)
    p.add_argument("--snr-to", type=float, required=True)
    p.add_argument("--snr-step", type=float, default=1.0)
    p.add_argument("--method", choices=("auto", "mc", "gh"), default="auto")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--nodes", type=int, default=20)
    p.add_argument("--no-crn", action="store_true",
                   help="decouple the noise stream from other systems")
    p.add_argument("--emit-plot", action="store_true")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_rate_sweep)

    p = sub.add_parser("coded-sweep", help="post-FEC BER over SNR grids")
    p.add_argument("--system", required=True)
    p.add_argument("--code", required=True, help="'gallager:<n>' or 'alist:<path>'")
    p.add_argument("--rates", default="1/2", help="comma list, e.g. 1/2,3/4 (gallager only)")
    p.add_argument("--target-errors", type=int, default=100)
    p.add_argument("--max-frames", type=int, default=200)
    p.add_argument("--metric-samples", type=int, default=1_000_000)
    p.add_argument("--snr-from", type=float, default=None,
                   help="explicit grid start; omit for a GMI-anchored grid")
    p.add_argument("--snr-to", type=float, default=None)
    p.add_argument("--snr-step", type=float, default=0.25)
    p.add_argument("--snr-offsets", default="0.4,0.8,1.2,1.6,2.0,2.4,2.8",
                   help="offsets (dB) from the GMI anchor when no explicit grid is given")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_coded_sweep)

    p = sub.add_parser("collapse", help="metric thresholds and spreads at a target post-FEC BER")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--target-berpos", type=float, default=1e-3)
    p.add_argument("--metric", choices=COLLAPSE_METRICS + ("all",), default="all")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("labeling-opt", help="binary-switching labeling search")
    p.add_argument("--constellation", required=True, help="catalog name or constellation file")
    p.add_argument("--snr", type=float, default=5.0, help="target SNR (dB) of the GMI cost")
    p.add_argument("--restarts", type=int, default=300)
    p.add_argument("--samples", type=int, default=20_000)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_labeling_opt)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    # first parse finds --config; its values become defaults, flags still win
    args = parser.parse_args(argv)
    config = getattr(args, "config", None)
    if not config:
        return args
    with open(config) as fh:
        defaults = json.load(fh)
    if not isinstance(defaults, dict):
        raise DataValidationError(f"{config}: config must be a JSON object")
    known = {a.dest for a in parser._actions}
    for p in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
        known |= {a.dest for a in p._actions}
    bad = set(defaults) - known
    if bad:
        raise DataValidationError(f"{config}: unknown keys {sorted(bad)}")
    for p in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
        p.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, sys.argv[1:] if argv is None else argv)
        return args.func(args)
    except CliUsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except (DataValidationError, CatalogError, FileFormatError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
