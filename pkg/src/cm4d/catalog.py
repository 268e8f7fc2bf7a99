"""Named systems: constellation + labeling pairs, normalized to unit energy.

The catalog covers the polarization-multiplexed QAM family (products of
PAM in all four dimensions), the power-efficient lattice constructions,
and two file slots for externally supplied optimized constellations.
The bundled 16-point optimized packing must pass its power-efficiency
gate before it is served; the 4096-point slot is validated for lattice
membership and cardinality.
"""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

import numpy as np

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
    nbc,
    normalize_energy,
    pam_points,
    product_constellation,
    product_labeling,
    so_pm_qpsk,
)

C4_4096_ENV = "CM4D_C4_4096"

C4_16_GAIN_GATE = (1.10, 1.12)  # dB over PM-QPSK


class CatalogError(ValueError):
    pass


class DataValidationError(ValueError):
    pass


def _pm_system(levels: int, per_dim_labeling: Labeling, name: str) -> LabeledConstellation:
    amps = pam_points(levels)
    c = product_constellation([amps] * 4, name)
    lab = product_labeling([per_dim_labeling] * 4)
    return LabeledConstellation(normalize_energy(c), lab)


def _pm_qpsk() -> LabeledConstellation:
    return _pm_system(2, brgc(1), "pm-qpsk")


def _ps_qpsk() -> LabeledConstellation:
    c = d4_odd_shells(1).with_name("ps-qpsk")
    # antipodal point pairs differ in the leading bit only
    words = np.array([0, 1, 2, 3, 7, 6, 5, 4], dtype=np.int64)
    return LabeledConstellation(normalize_energy(c), Labeling(3, words))


def _so_pm_qpsk() -> LabeledConstellation:
    # bundled labeling from the binary-switching search (see the file's
    # provenance header); point order is the constructor's canonical order
    lab = load_labeling(_bundled("so_pm_qpsk_labeling.csv"))
    return LabeledConstellation(normalize_energy(so_pm_qpsk()), lab)


def _c4_256() -> LabeledConstellation:
    c = d4_odd_shells(9).with_name("c4-256")
    return LabeledConstellation(normalize_energy(c), nbc(8))


def _d4_4096() -> LabeledConstellation:
    c = d4_subset(4096).with_name("d4-4096")
    return LabeledConstellation(normalize_energy(c), nbc(12))


def _bundled(filename: str) -> Path:
    return Path(str(resources.files("cm4d").joinpath("data", filename)))


def validate_c4_16(lc: LabeledConstellation | Constellation) -> LabeledConstellation:
    """Gate: 16 labeled points whose power-efficiency gain over PM-QPSK
    is 1.11 +- 0.01 dB."""
    if isinstance(lc, Constellation):
        raise DataValidationError("c4-16 file must carry a label column")
    if lc.size != 16:
        raise DataValidationError(f"c4-16 must have 16 points, got {lc.size}")
    ref = _pm_qpsk().constellation
    gain = asymptotic_gain_db(lc.constellation, ref, 4, 4)
    lo, hi = C4_16_GAIN_GATE
    if not lo <= gain <= hi:
        raise DataValidationError(
            f"c4-16 gain over PM-QPSK is {gain:.4f} dB, outside [{lo}, {hi}]"
        )
    return LabeledConstellation(normalize_energy(lc.constellation), lc.labeling)


def validate_c4_4096(obj: LabeledConstellation | Constellation) -> LabeledConstellation:
    """Gates: 4096 distinct points on the checkerboard lattice (integer
    coordinates, uniform coordinate-sum parity) with a labeling."""
    if isinstance(obj, Constellation):
        raise DataValidationError("c4-4096 file must carry a label column")
    c = obj.constellation
    if c.size != 4096:
        raise DataValidationError(f"c4-4096 must have 4096 points, got {c.size}")
    rounded = np.rint(c.points)
    if np.max(np.abs(c.points - rounded)) > 1e-9:
        raise DataValidationError("c4-4096 coordinates must be integers")
    parity = np.sum(rounded.astype(np.int64), axis=1) % 2
    if not (np.all(parity == parity[0])):
        raise DataValidationError("c4-4096 coordinate sums must share one parity")
    return LabeledConstellation(normalize_energy(c), obj.labeling)


def _c4_16() -> LabeledConstellation:
    lc = load_constellation(_bundled("c4_16.csv"), name="c4-16")
    return validate_c4_16(lc)


def _c4_4096() -> LabeledConstellation:
    path = os.environ.get(C4_4096_ENV, "").strip()
    if not path:
        raise CatalogError(
            f"system 'c4-4096' needs an external data file; set {C4_4096_ENV} to its path"
        )
    lc = load_constellation(path, name="c4-4096")
    return validate_c4_4096(lc)


_BUILDERS = {
    "pm-qpsk": _pm_qpsk,
    "pm-16qam-brgc": lambda: _pm_system(4, brgc(2), "pm-16qam-brgc"),
    "pm-16qam-nbc": lambda: _pm_system(4, nbc(2), "pm-16qam-nbc"),
    "pm-16qam-agc": lambda: _pm_system(4, agc2(), "pm-16qam-agc"),
    "pm-64qam-brgc": lambda: _pm_system(8, brgc(3), "pm-64qam-brgc"),
    "pm-64qam-nbc": lambda: _pm_system(8, nbc(3), "pm-64qam-nbc"),
    "pm-256qam-brgc": lambda: _pm_system(16, brgc(4), "pm-256qam-brgc"),
    "pm-256qam-nbc": lambda: _pm_system(16, nbc(4), "pm-256qam-nbc"),
    "ps-qpsk": _ps_qpsk,
    "so-pm-qpsk": _so_pm_qpsk,
    "c4-16": _c4_16,
    "c4-256": _c4_256,
    "d4-4096": _d4_4096,
    "c4-4096": _c4_4096,
}


def system_names(include_unavailable: bool = False) -> list[str]:
    names = list(_BUILDERS)
    if not include_unavailable and not os.environ.get(C4_4096_ENV, "").strip():
        names.remove("c4-4096")
    return names


def get_system(name: str) -> LabeledConstellation:
    """Resolve a catalog name or a constellation file path."""
    if name in _BUILDERS:
        return _BUILDERS[name]()
    path = Path(name)
    if path.suffix == ".csv" or path.exists():
        obj = load_constellation(path)
        if isinstance(obj, Constellation):
            raise CatalogError(f"file {name} has no label column; cannot form a system")
        return LabeledConstellation(normalize_energy(obj.constellation), obj.labeling)
    raise CatalogError(f"unknown system {name!r}")
