"""
Pattern look-up-table and sequence-wise predistorters.

Both work per real lane (XI, XQ, YI, YQ) at one sample per symbol. Errors are
``e = rx - tx`` on aligned, gain-normalized received symbols, and a correction
subtracts the stored error. Patterns are read cyclically around each position.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .constellation import AmplitudeAlphabet
from .errors import (
    AlignmentError,
    EvenPatternLength,
    FrameMismatch,
    LevelQuantizationError,
    LaneMismatch,
    ZeroSignal,
)
from .sequence import LANE_NAMES, frame_hash
from .waveform import align


def level_indices(tx, alphabet: AmplitudeAlphabet) -> np.ndarray:
    """Index of the level each transmitted amplitude sits on."""
    idx, dist = alphabet.index_of(tx)
    limit = alphabet.min_gap / 2 if alphabet.L > 1 else alphabet.tolerance
    bad = dist > limit
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise LevelQuantizationError(
            f"amplitude {float(np.asarray(tx)[k])!r} at position {k} is not on any level"
        )
    return idx


def pattern_keys(idx, n: int, L: int) -> np.ndarray:
    """Base-``L`` integer code of the cyclic length-``n`` window centered on each position.

    The leftmost symbol of the window is the most significant digit.
    """
    if n % 2 == 0:
        raise EvenPatternLength(f"pattern length must be odd, got {n}")
    if n * math.log2(max(L, 2)) >= 63:
        raise OverflowError(f"L**n = {L}**{n} does not fit a 64-bit key")
    half = (n - 1) // 2
    keys = np.zeros(len(idx), dtype=np.int64)
    for offset in range(-half, half + 1):
        keys = keys * L + np.roll(idx, -offset)
    return keys


def decode_key(key: int, n: int, L: int) -> tuple[int, ...]:
    digits = []
    for _ in range(n):
        key, d = divmod(int(key), L)
        digits.append(d)
    return tuple(reversed(digits))


def encode_pattern(pattern, L: int) -> int:
    key = 0
    for d in pattern:
        key = key * L + int(d)
    return key


@dataclass
class PatternTable:
    """One lane of a pattern LUT: sorted keys with accumulated error sums and counts."""

    n: int
    alphabet: AmplitudeAlphabet
    keys: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    error_sum: np.ndarray = field(default_factory=lambda: np.zeros(0))
    count: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        if self.n % 2 == 0:
            raise EvenPatternLength(f"pattern length must be odd, got {self.n}")

    def __len__(self):
        return len(self.keys)

    def accumulate(self, tx, rx_aligned) -> "PatternTable":
        """Add the center-symbol errors of every cyclic pattern in ``tx``."""
        tx = np.asarray(tx, dtype=float)
        rx_aligned = np.asarray(rx_aligned, dtype=float)
        if tx.shape != rx_aligned.shape:
            raise LaneMismatch("tx and rx lanes differ in length")
        keys = pattern_keys(level_indices(tx, self.alphabet), self.n, self.alphabet.L)
        err = rx_aligned - tx
        all_keys = np.concatenate([self.keys, keys])
        all_err = np.concatenate([self.error_sum, err])
        all_cnt = np.concatenate([self.count, np.ones(len(keys), dtype=np.int64)])
        uniq, inv = np.unique(all_keys, return_inverse=True)
        self.keys = uniq
        self.error_sum = np.bincount(inv, weights=all_err, minlength=len(uniq))
        self.count = np.bincount(inv, weights=all_cnt, minlength=len(uniq)).astype(np.int64)
        return self

    def average(self) -> np.ndarray:
        return self.error_sum / self.count

    def lookup(self, keys) -> np.ndarray:
        """Averaged error for each key; zero for patterns never seen."""
        keys = np.asarray(keys, dtype=np.int64)
        out = np.zeros(keys.shape)
        if len(self.keys) == 0:
            return out
        pos = np.clip(np.searchsorted(self.keys, keys), 0, len(self.keys) - 1)
        hit = self.keys[pos] == keys
        out[hit] = self.error_sum[pos[hit]] / self.count[pos[hit]]
        return out

    def entry(self, pattern) -> tuple[float, int] | None:
        key = encode_pattern(pattern, self.alphabet.L)
        pos = np.searchsorted(self.keys, key)
        if pos < len(self.keys) and self.keys[pos] == key:
            return float(self.error_sum[pos]), int(self.count[pos])
        return None


def train_pattern_lut(tx_lane, rx_lane_aligned, alphabet: AmplitudeAlphabet, n: int) -> PatternTable:
    return PatternTable(n, alphabet).accumulate(tx_lane, rx_lane_aligned)


def clip_bounds(alphabet: AmplitudeAlphabet) -> tuple[float, float]:
    gap = alphabet.min_gap if alphabet.L > 1 else 0.0
    return float(alphabet.levels[0] - gap), float(alphabet.levels[-1] + gap)


def _clip(out, bounds):
    if bounds is None:
        return out, 0
    lo, hi = bounds
    n_clip = int(np.count_nonzero((out < lo) | (out > hi)))
    return np.clip(out, lo, hi), n_clip


def apply_pattern_lut(tx_lane, table: PatternTable, mu: float = 1.0, bounds=None) -> np.ndarray:
    """``tx[k] - mu * avg_error(pattern at k)``; unseen patterns are left uncorrected."""
    tx = np.asarray(tx_lane, dtype=float)
    keys = pattern_keys(level_indices(tx, table.alphabet), table.n, table.alphabet.L)
    return _clip(tx - mu * table.lookup(keys), bounds)[0]


@dataclass
class PatternLUT:
    """Four-lane pattern predistorter."""

    n: int
    tables: list[PatternTable]
    mu: float = 1.0

    @classmethod
    def empty(cls, n: int, alphabet: AmplitudeAlphabet, mu: float = 1.0, lanes: int = 4) -> "PatternLUT":
        return cls(n, [PatternTable(n, alphabet) for _ in range(lanes)], mu)

    def train(self, tx_lanes, rx_aligned_lanes) -> "PatternLUT":
        for table, tx, rx in zip(self.tables, tx_lanes, rx_aligned_lanes):
            table.accumulate(tx, rx)
        return self

    def apply(self, tx_lanes, clip: bool = True) -> tuple[np.ndarray, int]:
        """Predistorted lanes and the number of clipped amplitudes."""
        out = np.empty(np.shape(tx_lanes))
        clipped = 0
        for k, (table, tx) in enumerate(zip(self.tables, tx_lanes)):
            raw = apply_pattern_lut(tx, table, self.mu)
            out[k], c = _clip(raw, clip_bounds(table.alphabet) if clip else None)
            clipped += c
        return out, clipped

    def storage(self) -> list[int]:
        return [len(t) for t in self.tables]

    def save(self, path) -> None:
        """Text dump: one ``[lane]`` section per lane, rows ``i0,i1,...:error_sum:count``."""
        with open(path, "w") as fh:
            fh.write(f"# pattern-lut n={self.n} mu={self.mu!r}\n")
            levels = self.tables[0].alphabet.levels if self.tables else []
            fh.write("# levels=" + ",".join(repr(float(v)) for v in levels) + "\n")
            for name, table in zip(LANE_NAMES, self.tables):
                fh.write(f"[{name}]\n")
                L = table.alphabet.L
                for key, s, cnt in zip(table.keys, table.error_sum, table.count):
                    pattern = ",".join(str(d) for d in decode_key(key, self.n, L))
                    fh.write(f"{pattern}:{float(s)!r}:{int(cnt)}\n")

    @classmethod
    def load(cls, path) -> "PatternLUT":
        n = mu = None
        levels = None
        rows: dict[str, list] = {}
        current = None
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line.startswith("# pattern-lut"):
                    fields = dict(tok.split("=") for tok in line.split()[2:])
                    n, mu = int(fields["n"]), float(fields["mu"])
                elif line.startswith("# levels="):
                    levels = [float(v) for v in line[len("# levels="):].split(",") if v]
                elif line.startswith("["):
                    current = line.strip("[]")
                    rows[current] = []
                elif line:
                    pat, s, cnt = line.split(":")
                    rows[current].append((tuple(int(d) for d in pat.split(",")), float(s), int(cnt)))
        if n is None or levels is None:
            raise ValueError(f"{path} is not a pattern LUT file")
        alphabet = AmplitudeAlphabet(np.array(levels))
        tables = []
        for name in [nm for nm in LANE_NAMES if nm in rows]:
            entries = rows[name]
            keys = np.array([encode_pattern(p, alphabet.L) for p, _, _ in entries], dtype=np.int64)
            order = np.argsort(keys)
            tables.append(
                PatternTable(
                    n,
                    alphabet,
                    keys[order],
                    np.array([s for _, s, _ in entries])[order],
                    np.array([c for _, _, c in entries], dtype=np.int64)[order],
                )
            )
        return cls(n, tables, mu)


@dataclass
class SequenceLUT:
    """Per-position accumulated errors for one specific frame."""

    errors: np.ndarray
    frame_id: str
    mu: float = 1.0
    iterations: int = 0
    residuals: list[float] = field(default_factory=list)

    @classmethod
    def zeros(cls, tx_lanes, mu: float = 1.0) -> "SequenceLUT":
        tx_lanes = np.asarray(tx_lanes, dtype=float)
        return cls(np.zeros_like(tx_lanes), frame_hash(tx_lanes), mu)

    @property
    def N(self) -> int:
        return self.errors.shape[-1]

    def check_frame(self, tx_lanes) -> None:
        fid = frame_hash(tx_lanes)
        if fid != self.frame_id:
            raise FrameMismatch(f"LUT trained for frame {self.frame_id}, got {fid}")

    def apply(self, tx_lanes, bounds=None) -> tuple[np.ndarray, int]:
        self.check_frame(tx_lanes)
        out = np.asarray(tx_lanes, dtype=float) - self.errors
        if bounds is None:
            return out, 0
        lo, hi = bounds
        n_clip = int(np.count_nonzero((out < lo) | (out > hi)))
        return np.clip(out, lo, hi), n_clip

    def storage(self) -> list[int]:
        return [self.N] * self.errors.shape[0]

    def save(self, path) -> None:
        """Little-endian float64 errors (lane-major) plus a ``.meta`` sidecar."""
        path = Path(path)
        np.ascontiguousarray(self.errors, dtype="<f8").tofile(path)
        with open(path.with_suffix(path.suffix + ".meta"), "w") as fh:
            fh.write(
                f"frame_id={self.frame_id}\niterations={self.iterations}\nmu={self.mu!r}\n"
                f"lanes={self.errors.shape[0]}\nN={self.N}\n"
            )

    @classmethod
    def load(cls, path) -> "SequenceLUT":
        path = Path(path)
        meta = {}
        with open(path.with_suffix(path.suffix + ".meta")) as fh:
            for line in fh:
                if "=" in line:
                    k, v = line.strip().split("=", 1)
                    meta[k] = v
        errors = np.fromfile(path, dtype="<f8").reshape(int(meta["lanes"]), int(meta["N"]))
        return cls(errors, meta["frame_id"], float(meta["mu"]), int(meta["iterations"]))


def apply_sequence_lut(tx_lane, errors) -> np.ndarray:
    """Single-lane correction ``tx[k] - errors[k]``."""
    return np.asarray(tx_lane, dtype=float) - np.asarray(errors, dtype=float)


def align_lanes(tx_lanes, rx_lanes) -> np.ndarray:
    out = np.empty(np.shape(tx_lanes))
    for k, (tx, rx) in enumerate(zip(tx_lanes, rx_lanes)):
        try:
            _, _, out[k] = align(tx, rx)
        except ZeroSignal as exc:
            raise AlignmentError(f"lane {LANE_NAMES[k] if k < 4 else k}: {exc}") from exc
        if not np.all(np.isfinite(out[k])):
            raise AlignmentError(f"lane {k}: non-finite aligned samples")
    return out


def train_sequence_lut(
    tx_lanes,
    lut: SequenceLUT,
    channel: Callable[[np.ndarray], np.ndarray],
    bounds=None,
) -> SequenceLUT:
    """One training pass: transmit with the current LUT, measure, accumulate.

    The RMS of ``rx - tx`` seen during the pass (the residual of the LUT before
    this update) is appended to ``lut.residuals``.
    """
    tx_lanes = np.asarray(tx_lanes, dtype=float)
    lut.check_frame(tx_lanes)
    pd, _ = lut.apply(tx_lanes, bounds)
    rx = align_lanes(tx_lanes, channel(pd))
    err = rx - tx_lanes
    lut.errors = lut.errors + lut.mu * err
    lut.iterations += 1
    lut.residuals.append(float(np.sqrt(np.mean(err**2))))
    return lut


def predistorter_storage(lut) -> list[int]:
    """Stored entries per lane."""
    return lut.storage()
