"""
Parametric transmitter (DAC, driver and modulator) and noise loading.

The transmitter is a Wiener model: cyclic FIR memory followed by a static
``vsat * tanh(v / vsat)`` saturation, driven at a peak amplitude ``swing``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .waveform import (
    LinearPrecomp,
    RrcFilter,
    Waveform,
    apply_precomp,
    cyclic_filter,
    matched_downsample,
    rrc_taps,
    shape,
)

DEFAULT_MEMORY_FIR = (0.7, 0.2, 0.1)
SWING_REF = 0.4
VSAT_DEFAULT = SWING_REF / 0.8


@dataclass(frozen=True)
class TransmitterModel:
    """Drive and impairment parameters; voltages in volts."""

    swing: float = SWING_REF
    memory_fir: tuple[float, ...] = DEFAULT_MEMORY_FIR
    vsat: float = VSAT_DEFAULT
    quant_bits: int | None = None
    clip: float | None = None

    def __post_init__(self):
        fir = tuple(float(v) for v in self.memory_fir)
        object.__setattr__(self, "memory_fir", fir)
        if self.swing <= 0:
            raise ValueError("swing must be positive")
        if self.vsat <= 0:
            raise ValueError("vsat must be positive")
        if abs(sum(fir) - 1.0) > 1e-12:
            raise ValueError(f"memory_fir must have unit DC gain, taps sum to {sum(fir)!r}")
        if self.quant_bits is not None and self.quant_bits < 1:
            raise ValueError("quant_bits must be >= 1")


@dataclass(frozen=True)
class NoiseConfig:
    """Either a per-2D-symbol SNR or an OSNR with its conversion parameters."""

    snr_db: float | None = None
    osnr_db: float | None = None
    b_ref: float = 12.5e9
    rs: float = 48.8e9
    pols: int = 2
    seed: int = 0

    def __post_init__(self):
        if (self.snr_db is None) == (self.osnr_db is None):
            raise ValueError("specify exactly one of snr_db and osnr_db")

    def effective_snr_db(self) -> float:
        if self.snr_db is not None:
            return self.snr_db
        return osnr_to_snr(self.osnr_db, self.rs, self.b_ref, self.pols)


def quantize(v, bits: int, clip: float) -> np.ndarray:
    """Uniform mid-rise quantizer with ``2**bits`` levels spanning ``[-clip, clip]``."""
    step = 2.0 * clip / 2**bits
    q = (np.floor(np.clip(v, -clip, clip) / step) + 0.5) * step
    return np.clip(q, -clip + step / 2, clip - step / 2)


def transmit(w: Waveform, model: TransmitterModel) -> Waveform:
    """Drive the transmitter with each lane of ``w`` (last axis = time).

    Lanes are peak-normalized to the swing, optionally quantized, filtered by
    the FIR memory and saturated. The output is scaled back by ``peak / swing``
    so a linear transmitter returns its input.
    """
    x = np.asarray(w.samples, dtype=float)
    peak = np.max(np.abs(x), axis=-1, keepdims=True)
    peak = np.where(peak > 0, peak, 1.0)
    g = model.swing
    v = x / peak * g
    if model.quant_bits:
        v = quantize(v, model.quant_bits, model.clip if model.clip is not None else g)
    if len(model.memory_fir) > 1:
        v = cyclic_filter(v, model.memory_fir)
    elif model.memory_fir[0] != 1.0:
        v = v * model.memory_fir[0]
    v = model.vsat * np.tanh(v / model.vsat)
    return Waveform(v / g * peak, w.sps, w.rate)


def osnr_to_snr(osnr_db, rs, b_ref=12.5e9, pols=2):
    """Per-symbol SNR from OSNR over ``b_ref``: ``osnr + 10 log10(2 b_ref / (p rs))``."""
    return osnr_db + 10.0 * np.log10(2.0 * b_ref / (pols * rs))


def combine_snr_db(*snrs_db) -> float:
    """SNR of independent noise sources added together (``inf`` entries ignored)."""
    inv = sum(10.0 ** (-s / 10.0) for s in snrs_db if s is not None and math.isfinite(s))
    return math.inf if inv == 0 else -10.0 * math.log10(inv)


def add_awgn(symbols, snr_db: float | None, seed: int = 0):
    """Circular complex Gaussian noise of variance ``10**(-snr/10)`` per 2D symbol.

    ``snr_db`` of ``None`` or ``inf`` returns the input unchanged.
    """
    symbols = np.asarray(symbols)
    if snr_db is None or math.isinf(snr_db):
        return symbols.copy()
    var = 10.0 ** (-snr_db / 10.0)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(symbols.shape + (2,)) * math.sqrt(var / 2.0)
    return symbols + noise[..., 0] + 1j * noise[..., 1]


@dataclass
class LinkChain:
    """Shaping, precompensation, transmitter and matched filter for (4, N) symbol lanes.

    Calling the chain returns the received lanes at one sample per symbol,
    before alignment.
    """

    model: TransmitterModel = field(default_factory=TransmitterModel)
    rrc: RrcFilter = field(default_factory=lambda: rrc_taps(0.01, 64, 4))
    precomp: bool = True
    precomp_epsilon: float = 1e-4
    rate: float | None = 48.8e9

    def __call__(self, lanes) -> np.ndarray:
        lanes = np.asarray(lanes, dtype=float)
        w = shape(lanes, self.rrc, self.rate)
        if self.precomp:
            p = LinearPrecomp.from_fir(self.model.memory_fir, w.samples.shape[-1], self.precomp_epsilon)
            w = apply_precomp(w, p)
        w = transmit(w, self.model)
        return matched_downsample(w, self.rrc, 0)

    def with_swing(self, swing: float) -> "LinkChain":
        m = self.model
        model = TransmitterModel(swing, m.memory_fir, m.vsat, m.quant_bits, m.clip)
        return LinkChain(model, self.rrc, self.precomp, self.precomp_epsilon, self.rate)
