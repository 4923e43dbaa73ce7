"""
Deterministic PRBS symbol frames and their four-lane (XI, XQ, YI, YQ) view.

Bits come from a degree-23 Fibonacci LFSR with feedback polynomial
x^23 + x^18 + 1 (the ITU-T O.150 PRBS23), i.e. ``b[k] = b[k-23] ^ b[k-18]``.
The integer seed is mixed with SplitMix64 and reduced to a nonzero 23-bit
register, which supplies the first 23 output bits. Symbol ``k`` of the
X polarization takes bits ``[2mk, 2mk+m)`` and symbol ``k`` of the Y
polarization the following ``m`` bits, MSB first.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constellation import Constellation
from .errors import LaneMismatch

LANE_NAMES = ("XI", "XQ", "YI", "YQ")

PRBS_DEGREE = 23
PRBS_TAP = 18
_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def prbs_state(seed: int) -> int:
    """Nonzero 23-bit initial register for ``seed``."""
    return _splitmix64(int(seed) & _MASK64) % ((1 << PRBS_DEGREE) - 1) + 1


def prbs_bits(seed: int, count: int) -> np.ndarray:
    """First ``count`` bits of the PRBS23 stream for ``seed`` (uint8 array)."""
    deg, tap = PRBS_DEGREE, PRBS_TAP
    total = max(count, deg)
    out = np.empty(total, dtype=np.uint8)
    state = prbs_state(seed)
    out[:deg] = [(state >> (deg - 1 - i)) & 1 for i in range(deg)]
    k = deg
    # b[k-18] is the nearest dependency, so blocks of 18 bits are independent
    while k < total:
        stop = min(k + tap, total)
        out[k:stop] = out[k - deg:stop - deg] ^ out[k - tap:stop - tap]
        k = stop
    return out[:count].copy()


@dataclass(frozen=True, eq=False)
class SymbolSequence:
    """Dual-polarization frame of constellation symbols."""

    x_pol: np.ndarray
    y_pol: np.ndarray
    bits: np.ndarray | None = None
    seed: int | None = None
    constellation_name: str = ""

    def __post_init__(self):
        for name in ("x_pol", "y_pol"):
            arr = np.asarray(getattr(self, name), dtype=complex).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if len(self.x_pol) != len(self.y_pol):
            raise LaneMismatch("polarizations differ in length")

    @property
    def N(self) -> int:
        return len(self.x_pol)

    def lane_array(self) -> np.ndarray:
        """(4, N) real array in XI, XQ, YI, YQ order."""
        return np.stack([self.x_pol.real, self.x_pol.imag, self.y_pol.real, self.y_pol.imag])

    def symbols(self) -> np.ndarray:
        """(2, N) complex array, X then Y."""
        return np.stack([self.x_pol, self.y_pol])

    def bits_per_pol(self, m: int) -> np.ndarray:
        """(2, N, m) bit array (polarization, symbol, bit)."""
        if self.bits is None:
            raise ValueError("frame carries no source bits")
        return self.bits.reshape(self.N, 2, m).transpose(1, 0, 2)

    def frame_id(self) -> str:
        return frame_hash(self.lane_array())

    def __eq__(self, other):
        if not isinstance(other, SymbolSequence):
            return NotImplemented
        same_bits = (self.bits is None and other.bits is None) or (
            self.bits is not None and other.bits is not None and np.array_equal(self.bits, other.bits)
        )
        return (
            np.array_equal(self.x_pol, other.x_pol)
            and np.array_equal(self.y_pol, other.y_pol)
            and same_bits
            and self.seed == other.seed
            and self.constellation_name == other.constellation_name
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LaneView:
    lane: str
    values: np.ndarray


def frame_hash(lanes) -> str:
    arr = np.ascontiguousarray(np.asarray(lanes, dtype="<f8"))
    return hashlib.sha256(arr.tobytes()).hexdigest()[:16]


def generate_frame(seed: int, N: int, c: Constellation) -> SymbolSequence:
    """PRBS frame of ``N`` symbols per polarization mapped through the labels of ``c``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    m = c.m
    bits = prbs_bits(seed, 2 * m * N)
    values = bits.reshape(N, 2, m).astype(np.int64) @ c.index_weights
    idx = c.label_to_index()[values]
    return SymbolSequence(
        x_pol=c.points[idx[:, 0]],
        y_pol=c.points[idx[:, 1]],
        bits=bits,
        seed=seed,
        constellation_name=c.name,
    )


def lanes(s: SymbolSequence) -> tuple[LaneView, ...]:
    return tuple(LaneView(name, vals) for name, vals in zip(LANE_NAMES, s.lane_array()))


def reassemble(views, like: SymbolSequence | None = None) -> SymbolSequence:
    """Inverse of :func:`lanes`; metadata is copied from ``like`` when given."""
    by_name = {v.lane: np.asarray(v.values, dtype=float) for v in views}
    if set(by_name) != set(LANE_NAMES):
        raise LaneMismatch(f"need lanes {LANE_NAMES}, got {sorted(by_name)}")
    if len({len(v) for v in by_name.values()}) != 1:
        raise LaneMismatch("lane lengths differ")
    x = by_name["XI"] + 1j * by_name["XQ"]
    y = by_name["YI"] + 1j * by_name["YQ"]
    if like is None:
        return SymbolSequence(x, y)
    return SymbolSequence(x, y, bits=like.bits, seed=like.seed, constellation_name=like.constellation_name)


def save_frame(s: SymbolSequence, path) -> None:
    """Write lanes as little-endian float64 (lane-major) plus a ``.meta`` sidecar."""
    path = Path(path)
    np.ascontiguousarray(s.lane_array(), dtype="<f8").tofile(path)
    with open(path.with_suffix(path.suffix + ".meta"), "w") as fh:
        fh.write(f"seed={s.seed}\nN={s.N}\nconstellation={s.constellation_name}\n")


def load_frame(path) -> SymbolSequence:
    path = Path(path)
    meta = {}
    with open(path.with_suffix(path.suffix + ".meta")) as fh:
        for line in fh:
            if "=" in line:
                key, val = line.strip().split("=", 1)
                meta[key] = val
    n = int(meta["N"])
    data = np.fromfile(path, dtype="<f8")
    if data.size != 4 * n:
        raise LaneMismatch(f"expected {4 * n} values, found {data.size}")
    lanes_ = data.reshape(4, n)
    seed = None if meta.get("seed") in (None, "None") else int(meta["seed"])
    return SymbolSequence(
        lanes_[0] + 1j * lanes_[1],
        lanes_[2] + 1j * lanes_[3],
        seed=seed,
        constellation_name=meta.get("constellation", ""),
    )
