"""
Sweep runners: NGMI versus DAC swing, versus OSNR, and sequence-wise convergence.

Randomness is derived from the master seed with :func:`derive_seed`. The
evaluation noise depends only on the master seed, so every grid point and
every predistorter sees the same (rescaled) noise realization; training noise
is keyed by grid index and predistorter id. Neither depends on worker count.
"""
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..constellation import Constellation, amplitude_alphabet
from ..metrics import FEC_NGMI_LIMIT, MetricReport, constellation_penalty, extract_centroids, gmi
from ..predistort import PatternLUT, SequenceLUT, align_lanes, clip_bounds, train_sequence_lut
from ..sequence import generate_frame
from ..txchain import LinkChain, add_awgn, combine_snr_db, osnr_to_snr
from ..waveform import rrc_taps
from .config import ExperimentConfig, parse_variant

WORKERS_ENV = "SEQDPD_WORKERS"


def derive_seed(master: int, *keys) -> int:
    """Stable 32-bit seed from the master seed and a tuple of ints/strings."""
    words = [int(master) & 0xFFFFFFFF]
    for key in keys:
        words.append(zlib.crc32(key.encode()) if isinstance(key, str) else int(key) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _pool_map(fn, args):
    n = worker_count()
    if n == 1 or len(args) < 2:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=min(n, len(args))) as pool:
        futures = [pool.submit(fn, *a) for a in args]
        return [f.result() for f in futures]


@dataclass
class Experiment:
    """Resolved objects shared by all runners."""

    cfg: ExperimentConfig
    constellation: object
    frame: object
    tx: np.ndarray
    bits: np.ndarray
    alphabet: object

    @classmethod
    def build(cls, cfg: ExperimentConfig) -> "Experiment":
        c = cfg.load_constellation()
        frame = generate_frame(cfg.seed, cfg.n_symbols, c)
        return cls(cfg, c, frame, frame.lane_array(), frame.bits_per_pol(c.m), amplitude_alphabet(c))

    def chain(self, swing: float) -> LinkChain:
        w = self.cfg.waveform
        return LinkChain(
            model=self.cfg.transmitter_model(swing),
            rrc=rrc_taps(w.rrc_beta, w.rrc_span, w.sps),
            precomp=w.precomp,
            precomp_epsilon=w.precomp_epsilon,
            rate=self.cfg.noise.rs,
        )

    def bounds(self):
        return clip_bounds(self.alphabet) if self.cfg.predistortion.clip else None


def lanes_to_symbols(lanes) -> np.ndarray:
    lanes = np.asarray(lanes)
    return np.stack([lanes[0] + 1j * lanes[1], lanes[2] + 1j * lanes[3]])


def noisy_channel(chain, snr_db: float, seed: int):
    """Chain followed by symbol-rate AWGN; a new realization on every call."""
    rng = np.random.default_rng(seed)

    def channel(lanes):
        rx = chain(lanes)
        if snr_db is None or math.isinf(snr_db):
            return rx
        sigma = math.sqrt(10.0 ** (-snr_db / 10.0) / 2.0)
        return rx + sigma * rng.standard_normal(rx.shape)

    return channel


class Identity:
    id = "linear"

    def apply(self, tx):
        return np.array(tx, dtype=float), 0


@dataclass
class TrainedPattern:
    id: str
    lut: PatternLUT
    clip: bool = True

    def apply(self, tx):
        return self.lut.apply(tx, clip=self.clip)


@dataclass
class TrainedSequence:
    id: str
    lut: SequenceLUT
    bounds: tuple | None

    def apply(self, tx):
        return self.lut.apply(tx, self.bounds)


def train_predistorter(exp: Experiment, variant: str, chain: LinkChain, grid_index: int = 0):
    """Train ``variant`` against ``chain`` at the configured training SNR."""
    cfg = exp.cfg
    kind, n = parse_variant(variant)
    if kind == "linear":
        return Identity()
    seed = derive_seed(cfg.seed, "train", grid_index, variant)
    channel = noisy_channel(chain, cfg.noise.training_snr_db, seed)
    if kind == "lut":
        train_tx = exp.tx
        if cfg.predistortion.lut_training_seed is not None:
            train_tx = generate_frame(cfg.predistortion.lut_training_seed, cfg.n_symbols,
                                      exp.constellation).lane_array()
        lut = PatternLUT.empty(n, exp.alphabet, mu=cfg.predistortion.mu, lanes=len(train_tx))
        lut.train(train_tx, align_lanes(train_tx, channel(train_tx)))
        return TrainedPattern(variant, lut, cfg.predistortion.clip)
    lut = SequenceLUT.zeros(exp.tx, mu=cfg.predistortion.mu)
    for _ in range(cfg.predistortion.sw_iterations):
        train_sequence_lut(exp.tx, lut, channel, exp.bounds())
    return TrainedSequence(variant, lut, exp.bounds())


def received(exp: Experiment, chain: LinkChain, pd) -> tuple[np.ndarray, int]:
    """Aligned noiseless received lanes with predistorter ``pd`` applied."""
    lanes, clipped = pd.apply(exp.tx)
    return align_lanes(exp.tx, chain(lanes)), clipped


def evaluate(exp: Experiment, rx_lanes, snr_db: float) -> MetricReport:
    seed = derive_seed(exp.cfg.seed, "eval")
    noisy = add_awgn(lanes_to_symbols(rx_lanes), snr_db, seed)
    return gmi(noisy, exp.constellation, exp.bits, seed=seed)


@dataclass
class SweepRow:
    sweep_var: str
    sweep_value: float
    predistorter: str
    report: MetricReport
    clip_count: int
    wall_ms: float | None = None


@dataclass
class SweepResult:
    variable: str
    rows: list[SweepRow]
    config: ExperimentConfig
    predistorters: tuple[str, ...] = ()

    def curve(self, predistorter: str) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r.predistorter == predistorter]
        return np.array([r.sweep_value for r in rows]), np.array([r.report.ngmi for r in rows])

    def fec_crossing(self, limit: float = FEC_NGMI_LIMIT) -> dict:
        """First grid value at which each predistorter reaches ``limit`` (None if never)."""
        out = {}
        for pd in self.predistorters:
            x, y = self.curve(pd)
            hits = np.flatnonzero(y >= limit)
            out[pd] = float(x[hits[0]]) if len(hits) else None
        return out


def _variants(cfg: ExperimentConfig) -> tuple[str, ...]:
    return tuple(cfg.predistortion.variants) or ("linear",)


def _swing_point(cfg: ExperimentConfig, index: int, swing: float) -> list[SweepRow]:
    exp = Experiment.build(cfg)
    chain = exp.chain(swing)
    snr = exp.cfg.tx_snr_db(swing)
    if cfg.noise.loading_osnr_db is not None:
        load = osnr_to_snr(cfg.noise.loading_osnr_db, cfg.noise.rs, cfg.noise.b_ref, cfg.noise.pols)
        snr = combine_snr_db(snr, float(load))
    rows = []
    for variant in _variants(cfg):
        t0 = time.perf_counter()
        pd = train_predistorter(exp, variant, chain, index)
        rx, clipped = received(exp, chain, pd)
        report = evaluate(exp, rx, snr)
        rows.append(SweepRow("swing", swing, variant, report, clipped, 1e3 * (time.perf_counter() - t0)))
    return rows


def run_swing_sweep(cfg: ExperimentConfig) -> SweepResult:
    """NGMI versus DAC swing; predistorters are retrained at every swing."""
    cfg.validate()
    if cfg.sweep.variable != "swing":
        raise ValueError("run_swing_sweep needs sweep.variable = 'swing'")
    grid = cfg.sweep_values()
    chunks = _pool_map(_swing_point, [(cfg, i, v) for i, v in enumerate(grid)])
    return SweepResult("swing", [row for rows in chunks for row in rows], cfg, _variants(cfg))


def _noise_point(exp_cfg: ExperimentConfig, value: float) -> float:
    n = exp_cfg.noise
    if exp_cfg.sweep.variable == "osnr":
        load = float(osnr_to_snr(value, n.rs, n.b_ref, n.pols))
    else:
        load = value
    return combine_snr_db(exp_cfg.tx_snr_db(exp_cfg.transmitter.swing), load)


def _eval_point(exp: Experiment, value: float, rx_by_pd: dict, clips: dict, train_ms: dict):
    rows = []
    for variant, rx in rx_by_pd.items():
        t0 = time.perf_counter()
        report = evaluate(exp, rx, _noise_point(exp.cfg, value))
        wall = train_ms[variant] + 1e3 * (time.perf_counter() - t0)
        rows.append(SweepRow(exp.cfg.sweep.variable, value, variant, report, clips[variant], wall))
    return rows


def run_osnr_sweep(cfg: ExperimentConfig) -> SweepResult:
    """NGMI versus OSNR (or loading SNR) at fixed swing; predistorters trained once."""
    cfg.validate()
    if cfg.sweep.variable not in ("osnr", "snr"):
        raise ValueError("run_osnr_sweep needs sweep.variable = 'osnr' or 'snr'")
    exp = Experiment.build(cfg)
    chain = exp.chain(cfg.transmitter.swing)
    rx_by_pd, clips, train_ms = {}, {}, {}
    for variant in _variants(cfg):
        t0 = time.perf_counter()
        pd = train_predistorter(exp, variant, chain)
        rx_by_pd[variant], clips[variant] = received(exp, chain, pd)
        train_ms[variant] = 1e3 * (time.perf_counter() - t0)
    chunks = _pool_map(_eval_point, [(exp, v, rx_by_pd, clips, train_ms) for v in cfg.sweep_values()])
    return SweepResult(cfg.sweep.variable, [row for rows in chunks for row in rows], cfg, _variants(cfg))


@dataclass
class ConvergenceRow:
    iteration: int
    residual_rms: float
    residual_rel_peak: float
    report: MetricReport


@dataclass
class ConvergenceResult:
    rows: list[ConvergenceRow] = field(default_factory=list)
    peak: float = 1.0

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r.residual_rms for r in self.rows])


def run_sw_convergence(cfg: ExperimentConfig, iterations: int | None = None) -> ConvergenceResult:
    """Residual and NGMI of the sequence-wise LUT after each training pass.

    The residual is the RMS of ``rx - tx`` on the noiseless aligned output;
    training observations carry the configured training noise.
    """
    cfg.validate()
    iterations = cfg.predistortion.sw_iterations if iterations is None else iterations
    exp = Experiment.build(cfg)
    chain = exp.chain(cfg.transmitter.swing)
    channel = noisy_channel(chain, cfg.noise.training_snr_db, derive_seed(cfg.seed, "train", 0, "sw"))
    lut = SequenceLUT.zeros(exp.tx, mu=cfg.predistortion.mu)
    pd = TrainedSequence("sw", lut, exp.bounds())
    peak = float(np.max(np.abs(exp.tx)))
    snr = cfg.tx_snr_db(cfg.transmitter.swing)
    result = ConvergenceResult(peak=peak)
    for it in range(iterations + 1):
        rx, _ = received(exp, chain, pd)
        res = float(np.sqrt(np.mean((rx - exp.tx) ** 2)))
        result.rows.append(ConvergenceRow(it, res, res / peak, evaluate(exp, rx, snr)))
        if it < iterations:
            train_sequence_lut(exp.tx, lut, channel, exp.bounds())
    return result


def tanh_compressed(c: Constellation, drive: float = 0.8) -> np.ndarray:
    """Per-dimension ``tanh`` compression with the outermost coordinate driven to ``drive``."""
    peak = max(np.max(np.abs(c.points.real)), np.max(np.abs(c.points.imag)))
    return np.tanh(drive * c.points.real / peak) + 1j * np.tanh(drive * c.points.imag / peak)


def run_penalty(cfg: ExperimentConfig):
    """Designed versus distorted constellation under AWGN.

    With ``penalty.source = "chain"`` the distorted points are the received
    centroids of a linear-only, noiseless transmission at ``transmitter.swing``;
    with ``"tanh"`` they are a memoryless compression of the designed points.
    Returns ``(curves, designed, distorted_points)``.
    """
    cfg.validate()
    c = cfg.load_constellation()
    if cfg.penalty.source == "tanh":
        points = tanh_compressed(c, cfg.penalty.drive)
    else:
        exp = Experiment.build(cfg)
        chain = exp.chain(cfg.transmitter.swing)
        rx, _ = received(exp, chain, Identity())
        dist = extract_centroids(lanes_to_symbols(exp.tx), lanes_to_symbols(rx), c)
        points = dist.centroids
    distorted = Constellation.from_points(points, c.labels, name=f"{c.name}-distorted")
    curves = constellation_penalty(c, distorted, cfg.penalty.snr_db, cfg.penalty.n_symbols,
                                   seed=derive_seed(cfg.seed, "penalty"))
    return curves, c, distorted.points
