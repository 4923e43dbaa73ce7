"""
Modulation formats: construction, file ingestion and per-dimension amplitude analysis.

Constellation files are plain text, one point per row::

    # comment
    0000000,-11.0,7.0
    0000001,-11.0,5.0

with the bit label first, then the in-phase and quadrature coordinates.
Points are rescaled to unit average energy on load.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadCardinality,
    BadLabel,
    DuplicateLabel,
    EvenPatternLength,
    ParseError,
    UnknownFormat,
)

DEFAULT_TOL = 1e-6
CENTROID_TOL = 1e-3

BUILTIN_FORMATS = ("qpsk", "qam16", "qam64", "cross-qam128", "qam256")


@dataclass(frozen=True, eq=False)
class Constellation:
    """Unit-energy 2D constellation with distinct bit labels.

    ``points`` is a complex array (I + jQ); ``labels[i]`` is the m-bit string of
    ``points[i]``. ``scale`` is the factor applied to the raw coordinates during
    normalization.
    """

    points: np.ndarray
    labels: tuple[str, ...]
    name: str = ""
    scale: float = 1.0
    _bits: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", tuple(self.labels))
        _validate(pts, self.labels)
        bits = np.array([[int(ch) for ch in lab] for lab in self.labels], dtype=np.uint8)
        bits.setflags(write=False)
        object.__setattr__(self, "_bits", bits)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def m(self) -> int:
        return int(round(math.log2(self.size)))

    @property
    def bit_matrix(self) -> np.ndarray:
        """(size, m) array of label bits, MSB first."""
        return self._bits

    @property
    def index_weights(self) -> np.ndarray:
        return 1 << np.arange(self.m - 1, -1, -1)

    def label_to_index(self) -> np.ndarray:
        """Map from integer label value to point index."""
        lut = np.empty(self.size, dtype=np.int64)
        lut[self._bits.astype(np.int64) @ self.index_weights] = np.arange(self.size)
        return lut

    def energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    @classmethod
    def from_points(cls, points, labels, name="") -> "Constellation":
        """Normalize raw ``points`` to unit average energy and build the constellation."""
        pts = np.asarray(points, dtype=complex)
        energy = np.mean(np.abs(pts) ** 2)
        if energy == 0:
            scale = 1.0
        else:
            scale = 1.0 / math.sqrt(energy)
        return cls(pts * scale, tuple(labels), name=name, scale=scale)


def _validate(points, labels):
    n = len(points)
    if n < 1 or n & (n - 1):
        raise BadCardinality(f"point count {n} is not a power of two")
    if len(labels) != n:
        raise BadLabel(f"{len(labels)} labels for {n} points")
    m = int(round(math.log2(n)))
    seen = set()
    for lab in labels:
        if len(lab) != m or any(ch not in "01" for ch in lab):
            raise BadLabel(f"label {lab!r} is not a {m}-bit string")
        if lab in seen:
            raise DuplicateLabel(f"label {lab!r} appears more than once")
        seen.add(lab)


def load_constellation(path) -> Constellation:
    """Read a ``bits,I,Q`` constellation file and normalize it to unit energy."""
    path = Path(path)
    labels, coords = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise ParseError(f"expected 'bits,I,Q', got {raw.strip()!r}", lineno)
            bits, i_str, q_str = parts
            if not bits or any(ch not in "01" for ch in bits):
                raise ParseError(f"bad bit label {bits!r}", lineno)
            try:
                coords.append(complex(float(i_str), float(q_str)))
            except ValueError:
                raise ParseError(f"bad coordinate in {raw.strip()!r}", lineno) from None
            labels.append(bits)
    if not labels:
        raise ParseError("no constellation rows", None)
    lengths = {len(lab) for lab in labels}
    if len(lengths) > 1:
        raise BadLabel(f"label lengths differ: {sorted(lengths)}")
    if len(set(labels)) != len(labels):
        dup = next(lab for lab in labels if labels.count(lab) > 1)
        raise DuplicateLabel(f"label {dup!r} appears more than once")
    return Constellation.from_points(coords, labels, name=path.stem)


def save_constellation(c: Constellation, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {c.name} m={c.m}\n")
        for lab, p in zip(c.labels, c.points):
            fh.write(f"{lab},{float(p.real)!r},{float(p.imag)!r}\n")


def gray_code(n_bits: int) -> np.ndarray:
    idx = np.arange(2**n_bits)
    return idx ^ (idx >> 1)


def _bits_str(value: int, width: int) -> str:
    return format(int(value), f"0{width}b")


def _square_qam(order: int, name: str) -> Constellation:
    k = int(round(math.log2(order))) // 2
    side = 2**k
    levels = np.arange(-(side - 1), side, 2)
    gray = gray_code(k)
    points, labels = [], []
    for ii, li in enumerate(levels):
        for qq, lq in enumerate(levels):
            points.append(complex(li, lq))
            labels.append(_bits_str(gray[ii], k) + _bits_str(gray[qq], k))
    return Constellation.from_points(points, labels, name=name)


def _cross_qam128() -> Constellation:
    # Start from an 8x16 Gray-labeled rectangle (3 I-bits, 4 Q-bits) and move the
    # 32 points with |Q| in {13, 15} to the sides: (i, q) -> (sign(i)(|q|-4), sign(q)(8-|i|)).
    i_levels = np.arange(-7, 8, 2)
    q_levels = np.arange(-15, 16, 2)
    gi, gq = gray_code(3), gray_code(4)
    points, labels = [], []
    for ii, li in enumerate(i_levels):
        for qq, lq in enumerate(q_levels):
            lab = _bits_str(gi[ii], 3) + _bits_str(gq[qq], 4)
            if abs(lq) > 11:
                pt = complex(np.sign(li) * (abs(lq) - 4), np.sign(lq) * (8 - abs(li)))
            else:
                pt = complex(li, lq)
            points.append(pt)
            labels.append(lab)
    return Constellation.from_points(points, labels, name="cross-qam128")


def builtin_constellation(name: str) -> Constellation:
    """Gray-labeled, unit-energy builtin format (see ``BUILTIN_FORMATS``)."""
    if name == "qpsk":
        return _square_qam(4, name)
    if name == "qam16":
        return _square_qam(16, name)
    if name == "qam64":
        return _square_qam(64, name)
    if name == "qam256":
        return _square_qam(256, name)
    if name == "cross-qam128":
        return _cross_qam128()
    raise UnknownFormat(f"unknown format {name!r}; expected one of {', '.join(BUILTIN_FORMATS)}")


@dataclass(frozen=True, eq=False)
class AmplitudeAlphabet:
    """Sorted distinct per-dimension amplitudes of a constellation."""

    levels: np.ndarray
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float).copy()
        lv.setflags(write=False)
        object.__setattr__(self, "levels", lv)

    @property
    def L(self) -> int:
        return len(self.levels)

    @property
    def min_gap(self) -> float:
        if self.L < 2:
            return math.inf
        return float(np.min(np.diff(self.levels)))

    def index_of(self, values) -> tuple[np.ndarray, np.ndarray]:
        """Nearest level index for each value, and the distance to that level."""
        values = np.asarray(values, dtype=float)
        pos = np.clip(np.searchsorted(self.levels, values), 1, max(self.L - 1, 1))
        if self.L == 1:
            idx = np.zeros(values.shape, dtype=np.int64)
        else:
            left = self.levels[pos - 1]
            right = self.levels[pos]
            idx = np.where(np.abs(values - left) <= np.abs(values - right), pos - 1, pos)
        return idx.astype(np.int64), np.abs(values - self.levels[idx])


def amplitude_alphabet(c: Constellation, tol: float = DEFAULT_TOL) -> AmplitudeAlphabet:
    """Merge all I and Q coordinates within ``tol`` (single linkage) into levels."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    coords = np.sort(np.concatenate([c.points.real, c.points.imag]))
    breaks = np.flatnonzero(np.diff(coords) > tol) + 1
    clusters = np.split(coords, breaks)
    return AmplitudeAlphabet(np.array([cl.mean() for cl in clusters]), tolerance=tol)


def lut_size(L: int, n: int, dims: int = 1) -> int:
    """Number of entries of a full pattern table: ``dims * L**n``."""
    if L < 2 or n < 1 or dims < 1:
        raise ValueError("need L >= 2, n >= 1, dims >= 1")
    if n % 2 == 0:
        raise EvenPatternLength(f"pattern length must be odd, got {n}")
    return int(dims) * int(L) ** int(n)
