"""
Linear DSP around the predistorters: RRC pulse shaping, matched filtering,
regularized zero-forcing precompensation and cyclic alignment.

All filtering is cyclic over the frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BadRollOff, SpectrumMismatch, ZeroSignal

DEFAULT_SPS = 4


@dataclass(frozen=True, eq=False)
class RrcFilter:
    beta: float
    span: int
    sps: int
    taps: np.ndarray

    @property
    def center(self) -> int:
        return (len(self.taps) - 1) // 2


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sps: int
    rate: float | None = None


@dataclass(frozen=True, eq=False)
class LinearPrecomp:
    """Frequency-domain transmitter response ``H`` and regularization floor."""

    channel_response: np.ndarray
    epsilon: float = 0.0

    @classmethod
    def from_fir(cls, fir, nfft: int, rel_epsilon: float = 1e-4) -> "LinearPrecomp":
        """Precompensation for a causal FIR, ``epsilon`` relative to peak ``|H|^2``."""
        H = np.fft.fft(np.asarray(fir, dtype=float), nfft)
        return cls(H, rel_epsilon * float(np.max(np.abs(H) ** 2)))

    def gain(self) -> np.ndarray:
        H = self.channel_response
        denom = np.abs(H) ** 2 + self.epsilon
        out = np.zeros_like(H)
        np.divide(np.conj(H), denom, out=out, where=denom > 0)
        return out


def rrc_impulse(t, beta):
    """Root-raised-cosine impulse response at times ``t`` in symbol periods (unnormalized)."""
    t = np.asarray(t, dtype=float)
    h = np.empty_like(t)
    at_zero = np.isclose(t, 0.0, atol=1e-12)
    singular = np.isclose(np.abs(t), 1.0 / (4.0 * beta), atol=1e-9) & ~at_zero
    regular = ~(at_zero | singular)

    h[at_zero] = 1.0 - beta + 4.0 * beta / math.pi
    h[singular] = (beta / math.sqrt(2.0)) * (
        (1 + 2 / math.pi) * math.sin(math.pi / (4 * beta))
        + (1 - 2 / math.pi) * math.cos(math.pi / (4 * beta))
    )
    tr = t[regular]
    num = np.sin(math.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(math.pi * tr * (1 + beta))
    den = math.pi * tr * (1 - (4 * beta * tr) ** 2)
    h[regular] = num / den
    return h


def rrc_taps(beta: float, span: int = 64, sps: int = DEFAULT_SPS) -> RrcFilter:
    """Unit-energy RRC filter with ``span * sps + 1`` taps centered on the peak."""
    if not 0 < beta <= 1:
        raise BadRollOff(f"roll-off must be in (0, 1], got {beta}")
    if (span * sps) % 2:
        raise ValueError("span * sps must be even")
    half = span * sps // 2
    t = np.arange(-half, half + 1) / sps
    h = rrc_impulse(t, beta)
    h /= np.sqrt(np.sum(h**2))
    return RrcFilter(beta, span, sps, h)


@lru_cache(maxsize=16)
def _taps_spectrum(taps_bytes: bytes, center: int, nfft: int) -> np.ndarray:
    taps = np.frombuffer(taps_bytes, dtype=float)
    if len(taps) > nfft:
        raise ValueError(f"filter ({len(taps)} taps) longer than frame ({nfft} samples)")
    buf = np.zeros(nfft)
    buf[: len(taps)] = taps
    spec = np.fft.rfft(np.roll(buf, -center))
    spec.setflags(write=False)
    return spec


def filter_spectrum(f: RrcFilter, nfft: int) -> np.ndarray:
    """Real-FFT spectrum of the zero-phase (cyclically centered) filter."""
    return _taps_spectrum(np.ascontiguousarray(f.taps).tobytes(), f.center, nfft)


def shape(lane, f: RrcFilter, rate: float | None = None) -> Waveform:
    """Upsample by zero insertion and filter cyclically; supports a leading batch axis."""
    lane = np.asarray(lane, dtype=float)
    up = np.zeros(lane.shape[:-1] + (lane.shape[-1] * f.sps,))
    up[..., :: f.sps] = lane
    nfft = up.shape[-1]
    out = np.fft.irfft(np.fft.rfft(up, axis=-1) * filter_spectrum(f, nfft), nfft, axis=-1)
    return Waveform(out, f.sps, rate)


def matched_downsample(w: Waveform, f: RrcFilter, delay: int = 0) -> np.ndarray:
    """Filter with the time-reversed taps, then keep every ``sps``-th sample from ``delay``."""
    x = np.asarray(w.samples, dtype=float)
    nfft = x.shape[-1]
    # symmetric taps: the time-reversed zero-phase filter has the conjugate spectrum
    y = np.fft.irfft(np.fft.rfft(x, axis=-1) * np.conj(filter_spectrum(f, nfft)), nfft, axis=-1)
    return np.roll(y, -delay, axis=-1)[..., :: f.sps]


def apply_precomp(w: Waveform, p: LinearPrecomp) -> Waveform:
    x = np.asarray(w.samples)
    G = p.gain()
    if G.shape[-1] != x.shape[-1]:
        raise SpectrumMismatch(f"response has {G.shape[-1]} bins, waveform {x.shape[-1]} samples")
    if np.all(G == 1):
        return Waveform(x.copy(), w.sps, w.rate)
    y = np.fft.ifft(np.fft.fft(x, axis=-1) * G, axis=-1)
    if not np.iscomplexobj(x):
        y = y.real
    return Waveform(y, w.sps, w.rate)


def cyclic_filter(x, fir) -> np.ndarray:
    """Causal FIR applied cyclically along the last axis."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    H = np.fft.rfft(np.asarray(fir, dtype=float), n)
    return np.fft.irfft(np.fft.rfft(x, axis=-1) * H, n, axis=-1)


def align(tx, rx):
    """Cyclic delay and real least-squares gain of ``rx`` against ``tx``.

    Returns ``(delay, gain, rx_aligned)`` with ``rx == gain * roll(tx, delay)``
    in the noiseless case and ``rx_aligned = roll(rx, -delay) / gain``.
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    if tx.shape != rx.shape:
        raise ValueError("tx and rx must have equal length")
    if not np.any(tx) or not np.any(rx):
        raise ZeroSignal("cannot align a zero-energy signal")
    xc = np.fft.irfft(np.fft.rfft(rx) * np.conj(np.fft.rfft(tx)), len(tx))
    delay = int(np.argmax(np.abs(xc)))
    shifted = np.roll(rx, -delay)
    gain = float(np.dot(shifted, tx) / np.dot(tx, tx))
    if gain == 0:
        raise ZeroSignal("received signal is orthogonal to the reference")
    return delay, gain, shifted / gain
