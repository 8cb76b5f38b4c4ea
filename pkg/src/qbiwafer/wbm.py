"""Wafer bin map ingestion: parsing, bivaluing, majority-vote compression, flattening.

Raw maps are 52x52 grids with 0 = no chip, 1 = good chip, 2 = defective
chip.  Two text formats are supported:

* ``WBM-TXT``: ``LABEL;c0,c1,...,c2703`` (row-major raw cells)
* ``FLAT-CSV``: ``LABEL,b0,...,b63`` (row-major compressed bits)
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, UnknownLabel, ValidationError

DEFECT_LABELS = ("Normal", "Center", "Doughnut", "Edge-Loc", "Edge-Ring", "Loc", "Near-Full", "Scratch", "Random")

RAW_SIDE = 52
SIDE = 8
N_FEATURES = SIDE * SIDE
WBM_TXT = "WBM-TXT"
FLAT_CSV = "FLAT-CSV"


class NoDefectCellsWarning(UserWarning):
    """A map handed to :func:`bivalue` has no defective cell (possibly already binary)."""


@dataclass(frozen=True)
class RawWaferMap:
    grid: np.ndarray
    label: str | None = None

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.shape != (RAW_SIDE, RAW_SIDE):
            raise ValidationError(f"raw map must be {RAW_SIDE}x{RAW_SIDE}, got {g.shape}")
        if not np.isin(g, (0, 1, 2)).all():
            raise ValidationError("raw map cells must be 0, 1 or 2")
        _check_label(self.label)
        object.__setattr__(self, "grid", g.astype(np.uint8))


@dataclass(frozen=True)
class FlatSample:
    bits: np.ndarray
    label: str | None = None

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 1 or not np.isin(b, (0, 1)).all():
            raise ValidationError("flat sample must be a 1-D bit vector")
        _check_label(self.label)
        object.__setattr__(self, "bits", b.astype(np.uint8))


def _check_label(label, line=None):
    if label is not None and label not in DEFECT_LABELS:
        raise UnknownLabel(label, line)


def band_edges(size: int = RAW_SIDE, bands: int = SIDE) -> np.ndarray:
    """Band boundaries ``floor(size * k / bands)`` for ``k = 0..bands``."""
    return np.array([size * k // bands for k in range(bands + 1)])


def bivalue(raw: RawWaferMap | np.ndarray) -> np.ndarray:
    grid = raw.grid if isinstance(raw, RawWaferMap) else np.asarray(raw)
    out = (grid == 2).astype(np.uint8)
    if not out.any():
        warnings.warn("map has no defective cells", NoDefectCellsWarning, stacklevel=2)
    return out


def compress(binary: np.ndarray, bands: int = SIDE) -> np.ndarray:
    """Majority vote per block; a half-full block counts as defective."""
    b = np.asarray(binary, dtype=np.int64)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValidationError("binary map must be square")
    if not np.isin(b, (0, 1)).all():
        raise ValidationError("binary map cells must be 0 or 1")
    edges = band_edges(b.shape[0], bands)
    counts = np.add.reduceat(np.add.reduceat(b, edges[:-1], axis=0), edges[:-1], axis=1)
    sizes = np.outer(np.diff(edges), np.diff(edges))
    return (2 * counts >= sizes).astype(np.uint8)


def flatten(c: np.ndarray) -> np.ndarray:
    return np.asarray(c, dtype=np.uint8).reshape(-1)


def unflatten(bits: Sequence[int], side: int = SIDE) -> np.ndarray:
    return np.asarray(bits, dtype=np.uint8).reshape(side, side)


def preprocess(raw: RawWaferMap) -> FlatSample:
    return FlatSample(flatten(compress(bivalue(raw))), raw.label)


def _parse_cells(text: str, expected: int, allowed: str, lineno: int) -> np.ndarray:
    cells = text.split(",")
    if len(cells) != expected:
        raise ParseError(lineno, f"expected {expected} cells, found {len(cells)}")
    for k, c in enumerate(cells):
        if len(c) != 1 or c not in allowed:
            raise ParseError(lineno, f"cell {k} is {c!r}, expected one of {','.join(allowed)}")
    return np.frombuffer("".join(cells).encode(), dtype=np.uint8) - ord("0")


def parse_line(line: str, fmt: str, lineno: int = 1, n_features: int = N_FEATURES):
    line = line.rstrip("\r\n")
    if fmt == WBM_TXT:
        label, sep, rest = line.partition(";")
        if not sep:
            raise ParseError(lineno, "missing ';' after label")
        _check_label(label, lineno)
        cells = _parse_cells(rest, RAW_SIDE * RAW_SIDE, "012", lineno)
        return RawWaferMap(cells.reshape(RAW_SIDE, RAW_SIDE), label)
    if fmt == FLAT_CSV:
        label, sep, rest = line.partition(",")
        if not sep:
            raise ParseError(lineno, "missing ',' after label")
        _check_label(label, lineno)
        return FlatSample(_parse_cells(rest, n_features, "01", lineno), label)
    raise ValidationError(f"unknown format {fmt!r}")


def parse_lines(lines: Iterable[str], fmt: str, n_features: int | None = None) -> list:
    out = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        out.append(parse_line(line, fmt, lineno, n_features or N_FEATURES))
    return out


def parse_dataset(path, fmt: str, n_features: int | None = None) -> list:
    """Read a dataset file; blank lines are skipped, anything else must parse."""
    with open(path, encoding="utf-8") as f:
        return parse_lines(f, fmt, n_features)


def read_flat_csv(path, n_features: int | None = None) -> tuple[np.ndarray, list[str]]:
    """FLAT-CSV rows as a ``(n, d)`` uint8 matrix plus labels.

    The width is taken from the first row when ``n_features`` is None.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if n_features is None:
        first = next((ln for ln in lines if ln.strip()), None)
        n_features = N_FEATURES if first is None else len(first.split(",")) - 1
    samples = parse_lines(lines, FLAT_CSV, n_features)
    X = np.array([s.bits for s in samples], dtype=np.uint8).reshape(len(samples), n_features)
    return X, [s.label for s in samples]


def write_flat_csv(path, X: np.ndarray, labels: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row, label in zip(np.asarray(X, dtype=np.uint8), labels):
            _check_label(label)
            f.write(label + "," + ",".join(map(str, row.tolist())) + "\n")


def format_raw(m: RawWaferMap) -> str:
    return f"{m.label};" + ",".join(map(str, m.grid.reshape(-1).tolist()))


def write_wbm_txt(path, maps: Iterable[RawWaferMap]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for m in maps:
            f.write(format_raw(m) + "\n")
