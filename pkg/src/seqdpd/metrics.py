"""
Receiver-side figures of merit: data-aided SNR, bit-wise GMI and NGMI,
distorted-constellation centroids and net data rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .constellation import Constellation
from .errors import BadNoiseVariance, MissingPoint
from .txchain import add_awgn

FEC_NGMI_LIMIT = 0.85
CSV_FIELDS = ("snr_db", "gmi", "ngmi", "m", "sigma2", "seed")


@dataclass(frozen=True)
class MetricReport:
    snr_db: float
    gmi: float
    ngmi: float
    m: int
    sigma2: float
    seed: int | None = None

    def csv_row(self) -> str:
        return ",".join(format_value(v) for v in (self.snr_db, self.gmi, self.ngmi, self.m, self.sigma2, self.seed))

    @property
    def decodable(self) -> bool:
        return passes_fec(self.ngmi)


def format_value(v) -> str:
    """CSV cell text: shortest round-trip floats, ``inf``/``-inf``, empty for None."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def passes_fec(ngmi: float, limit: float = FEC_NGMI_LIMIT) -> bool:
    return ngmi >= limit


def estimate_snr(tx_symbols, rx_symbols) -> float:
    """``10 log10(E|x|^2 / E|y - x|^2)``; ``inf`` when the error power is zero."""
    x = np.asarray(tx_symbols)
    y = np.asarray(rx_symbols)
    err = np.mean(np.abs(y - x) ** 2)
    if err == 0:
        return math.inf
    return float(10.0 * np.log10(np.mean(np.abs(x) ** 2) / err))


def nearest_points(rx, c: Constellation, chunk: int = 1 << 14) -> np.ndarray:
    rx = np.ravel(rx)
    out = np.empty(rx.size, dtype=np.int64)
    for start in range(0, rx.size, chunk):
        y = rx[start:start + chunk]
        out[start:start + chunk] = np.argmin(np.abs(y[:, None] - c.points[None, :]) ** 2, axis=1)
    return out


def gmi(rx_symbols, c: Constellation, tx_bits, sigma2: float | None = None, seed=None,
        chunk: int = 1 << 13) -> MetricReport:
    """Bit-wise GMI with a Gaussian auxiliary channel.

    ``rx_symbols`` is any array of received symbols and ``tx_bits`` the matching
    ``(..., m)`` array of transmitted label bits. When ``sigma2`` is omitted it
    is fitted as the mean squared error against the transmitted points.
    """
    y = np.ravel(np.asarray(rx_symbols, dtype=complex))
    m = c.m
    bits = np.asarray(tx_bits, dtype=np.int64).reshape(-1, m)
    if bits.shape[0] != y.size:
        raise ValueError(f"{y.size} symbols but {bits.shape[0]} bit groups")
    tx_idx = c.label_to_index()[bits @ c.index_weights]
    x = c.points[tx_idx]
    if sigma2 is None:
        sigma2 = float(np.mean(np.abs(y - x) ** 2))
        if sigma2 == 0:
            return MetricReport(math.inf, float(m), 1.0, m, 0.0, seed)
    if not sigma2 > 0:
        raise BadNoiseVariance(f"noise variance must be positive, got {sigma2}")

    cbits = c.bit_matrix.astype(float)  # (M, m)
    px, py = c.points.real, c.points.imag
    loss = 0.0
    for start in range(0, y.size, chunk):
        yc = y[start:start + chunk]
        metric = -((yc.real[:, None] - px) ** 2 + (yc.imag[:, None] - py) ** 2) / sigma2  # (n, M)
        metric -= metric.max(axis=1, keepdims=True)
        p = np.exp(metric)
        ones = p @ cbits  # (n, m): mass of points whose i-th bit is 1
        zeros = p @ (1.0 - cbits)
        bc = bits[start:start + chunk].astype(bool)
        same = np.where(bc, ones, zeros)
        other = np.where(bc, zeros, ones)
        # matching subset underflowed: redo those rows in the log domain
        weak = np.any(same < 1e-250, axis=1)
        terms = np.log1p(other / np.where(weak[:, None], 1.0, same))
        if np.any(weak):
            total = logsumexp(metric[weak], axis=1)
            terms[weak] = total[:, None] - _subset_logsumexp(metric[weak], c.bit_matrix, bc[weak])
        loss += float(np.sum(terms))
    g = m - loss / (y.size * math.log(2))
    snr = estimate_snr(x, y)
    return MetricReport(snr, g, g / m, m, float(sigma2), seed)


def _subset_logsumexp(metric, label_bits, tx_bits) -> np.ndarray:
    """log sum over points whose i-th bit equals the transmitted i-th bit, per row and bit."""
    out = np.empty(tx_bits.shape)
    for i in range(label_bits.shape[1]):
        match = label_bits[None, :, i].astype(bool) == tx_bits[:, i, None]
        out[:, i] = logsumexp(np.where(match, metric, -np.inf), axis=1)
    return out


@dataclass(frozen=True)
class DistortedConstellation:
    centroids: np.ndarray
    counts: np.ndarray
    labels: tuple[str, ...]

    def as_constellation(self, name: str = "distorted") -> Constellation:
        """Centroids renormalized to unit energy, keeping the original labels."""
        return Constellation.from_points(self.centroids, self.labels, name=name)


def extract_centroids(tx_symbols, rx_symbols, c: Constellation) -> DistortedConstellation:
    """Mean received symbol for each transmitted constellation point."""
    tx = np.ravel(np.asarray(tx_symbols, dtype=complex))
    rx = np.ravel(np.asarray(rx_symbols, dtype=complex))
    idx = nearest_points(tx, c)
    counts = np.bincount(idx, minlength=c.size)
    if np.any(counts == 0):
        raise MissingPoint([c.labels[k] for k in np.flatnonzero(counts == 0)])
    # average the offsets from the known point so that rx == tx is reproduced exactly
    dev = rx - c.points[idx]
    sums = np.bincount(idx, weights=dev.real, minlength=c.size) + 1j * np.bincount(
        idx, weights=dev.imag, minlength=c.size
    )
    return DistortedConstellation(c.points + sums / counts, counts, c.labels)


@dataclass(frozen=True)
class PenaltyCurves:
    snr_db: np.ndarray
    ngmi_original: np.ndarray
    ngmi_distorted: np.ndarray
    seed: int

    @property
    def gap(self) -> np.ndarray:
        return self.ngmi_original - self.ngmi_distorted

    @property
    def max_gap(self) -> float:
        return float(np.max(self.gap))


def constellation_penalty(original: Constellation, distorted: Constellation, snr_grid,
                          n_symbols: int = 1 << 18, seed: int = 0) -> PenaltyCurves:
    """Monte Carlo NGMI of both constellations over AWGN at each SNR.

    Both constellations see the same transmitted labels and the same noise
    realization at each grid point, so the gap is free of sampling noise
    between the two curves.
    """
    if original.labels != distorted.labels:
        lookup = {lab: k for k, lab in enumerate(distorted.labels)}
        order = [lookup[lab] for lab in original.labels]
        distorted = Constellation(distorted.points[order], original.labels, distorted.name, distorted.scale)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, original.size, n_symbols)
    bits = original.bit_matrix[idx]
    snr_grid = np.asarray(snr_grid, dtype=float)
    ngmi_o, ngmi_d = [], []
    for k, snr in enumerate(snr_grid):
        noise = add_awgn(np.zeros(n_symbols, dtype=complex), snr, seed=seed + 1 + k)
        sigma2 = 10.0 ** (-snr / 10.0)
        ngmi_o.append(gmi(original.points[idx] + noise, original, bits, sigma2).ngmi)
        ngmi_d.append(gmi(distorted.points[idx] + noise, distorted, bits, sigma2).ngmi)
    return PenaltyCurves(snr_grid, np.array(ngmi_o), np.array(ngmi_d), seed)


def net_rate(rs: float, m: int, pols: int, code_rate: float) -> float:
    """Net bit rate ``rs * m * pols * code_rate`` in bit/s."""
    if rs <= 0 or m <= 0 or pols <= 0:
        raise ValueError("rs, m and pols must be positive")
    if not 0 < code_rate <= 1:
        raise ValueError("code_rate must be in (0, 1]")
    return rs * m * pols * code_rate
