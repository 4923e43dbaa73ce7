"""
Experiment configuration: a TOML file with one table per section.

Example::

    seed = 1
    n_symbols = 65536
    output_dir = "runs/swing"

    [constellation]
    source = "cross-qam128"        # builtin name or path to a bits,I,Q file

    [transmitter]
    swing = 0.4
    vsat = 0.5
    memory_fir = [0.7, 0.2, 0.1]

    [predistortion]
    variants = ["linear", "lut3", "lut5", "sw"]

    [sweep]
    variable = "swing"
    values = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7]

Every key is optional; missing keys take the defaults of the dataclasses
below. Unknown keys and wrongly typed values raise :class:`ConfigError`
naming the offending field.
"""
import dataclasses
import math
import re
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomlkit

from ..constellation import BUILTIN_FORMATS, builtin_constellation, load_constellation
from ..errors import ConfigError, SeqDpdError
from ..txchain import TransmitterModel

SWEEP_VARIABLES = ("swing", "osnr", "snr")
DEFAULT_SWING_GRID = tuple(round(0.2 + 0.05 * k, 2) for k in range(11))
DEFAULT_OSNR_GRID = tuple(float(v) for v in range(26, 41))
_PD_PATTERN = re.compile(r"^(linear|sw|lut(\d+))$")


@dataclass
class ConstellationSection:
    source: str = "cross-qam128"


@dataclass
class WaveformSection:
    sps: int = 4
    rrc_beta: float = 0.01
    rrc_span: int = 256
    precomp: bool = True
    precomp_epsilon: float = 1e-4


@dataclass
class TransmitterSection:
    swing: float = 0.4
    swing_ref: float = 0.4
    vsat: float = 0.5
    memory_fir: typing.Tuple[float, ...] = (0.7, 0.2, 0.1)
    quant_bits: typing.Optional[int] = None
    clip: typing.Optional[float] = None


@dataclass
class NoiseSection:
    # transmitter SNR at swing_ref; scales as 20 log10(swing / swing_ref)
    tx_snr_ref_db: float = 28.0
    training_snr_db: float = math.inf
    loading_osnr_db: typing.Optional[float] = None
    rs: float = 48.8e9
    b_ref: float = 12.5e9
    pols: int = 2


@dataclass
class PredistortionSection:
    variants: typing.Tuple[str, ...] = ("linear", "lut3", "lut5", "sw")
    sw_iterations: int = 10
    mu: float = 1.0
    clip: bool = True
    # None trains pattern LUTs on the evaluated frame itself
    lut_training_seed: typing.Optional[int] = None


@dataclass
class SweepSection:
    variable: str = "swing"
    values: typing.Optional[typing.Tuple[float, ...]] = None


@dataclass
class PenaltySection:
    source: str = "chain"
    snr_db: typing.Tuple[float, ...] = tuple(float(v) for v in range(8, 21))
    n_symbols: int = 1 << 18
    drive: float = 0.8


@dataclass
class OutputSection:
    plots: bool = True
    record_wall_time: bool = False
    plot_format: str = "svg"


@dataclass
class ExperimentConfig:
    seed: int = 1
    n_symbols: int = 1 << 16
    output_dir: str = "out"
    constellation: ConstellationSection = field(default_factory=ConstellationSection)
    waveform: WaveformSection = field(default_factory=WaveformSection)
    transmitter: TransmitterSection = field(default_factory=TransmitterSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    predistortion: PredistortionSection = field(default_factory=PredistortionSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    penalty: PenaltySection = field(default_factory=PenaltySection)
    output: OutputSection = field(default_factory=OutputSection)

    def sweep_values(self) -> tuple:
        if self.sweep.values is not None:
            return tuple(self.sweep.values)
        if self.sweep.variable == "swing":
            return DEFAULT_SWING_GRID
        if self.sweep.variable == "osnr":
            return DEFAULT_OSNR_GRID
        return tuple(float(v) for v in range(10, 31, 2))

    def transmitter_model(self, swing=None) -> TransmitterModel:
        t = self.transmitter
        return TransmitterModel(
            swing=t.swing if swing is None else swing,
            memory_fir=t.memory_fir,
            vsat=t.vsat,
            quant_bits=t.quant_bits,
            clip=t.clip,
        )

    def tx_snr_db(self, swing: float) -> float:
        """Transmitter SNR emulation: ``tx_snr_ref_db + 20 log10(swing / swing_ref)``."""
        return self.noise.tx_snr_ref_db + 20.0 * math.log10(swing / self.transmitter.swing_ref)

    def load_constellation(self):
        src = self.constellation.source
        if src in BUILTIN_FORMATS:
            return builtin_constellation(src)
        return load_constellation(src)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def validate(self) -> "ExperimentConfig":
        _check(self.n_symbols >= 1, "n_symbols", "must be >= 1")
        src = self.constellation.source
        _check(src in BUILTIN_FORMATS or Path(src).is_file(), "constellation.source",
               f"not a builtin format ({', '.join(BUILTIN_FORMATS)}) or existing file")
        w = self.waveform
        _check(w.sps >= 2, "waveform.sps", "must be >= 2")
        _check(0 < w.rrc_beta <= 1, "waveform.rrc_beta", "must be in (0, 1]")
        _check(w.rrc_span >= 2 and (w.rrc_span * w.sps) % 2 == 0, "waveform.rrc_span",
               "must be >= 2 with span*sps even")
        _check(w.rrc_span < self.n_symbols, "waveform.rrc_span", "filter longer than the frame")
        _check(w.precomp_epsilon >= 0, "waveform.precomp_epsilon", "must be >= 0")
        t = self.transmitter
        _check(t.swing > 0, "transmitter.swing", "must be positive")
        _check(t.swing_ref > 0, "transmitter.swing_ref", "must be positive")
        _check(t.vsat > 0, "transmitter.vsat", "must be positive")
        _check(len(t.memory_fir) >= 1 and abs(sum(t.memory_fir) - 1.0) <= 1e-12,
               "transmitter.memory_fir", "taps must sum to 1")
        _check(t.quant_bits is None or t.quant_bits >= 1, "transmitter.quant_bits", "must be >= 1")
        _check(t.clip is None or t.clip > 0, "transmitter.clip", "must be positive")
        n = self.noise
        for name in ("rs", "b_ref"):
            _check(getattr(n, name) > 0, f"noise.{name}", "must be positive")
        _check(n.pols in (1, 2), "noise.pols", "must be 1 or 2")
        p = self.predistortion
        seen = set()
        for k, v in enumerate(p.variants):
            match = _PD_PATTERN.match(v)
            _check(match is not None, f"predistortion.variants[{k}]",
                   f"{v!r} is not one of linear, sw, lut<n>")
            if match.group(2) is not None:
                n_pat = int(match.group(2))
                _check(n_pat % 2 == 1, f"predistortion.variants[{k}]", "pattern length must be odd")
            _check(v not in seen, f"predistortion.variants[{k}]", f"duplicate variant {v!r}")
            seen.add(v)
        _check(p.sw_iterations >= 0, "predistortion.sw_iterations", "must be >= 0")
        _check(p.mu > 0, "predistortion.mu", "must be positive")
        s = self.sweep
        _check(s.variable in SWEEP_VARIABLES, "sweep.variable",
               f"must be one of {', '.join(SWEEP_VARIABLES)}")
        values = self.sweep_values()
        _check(len(values) > 0, "sweep.values", "grid is empty")
        _check(list(values) == sorted(values), "sweep.values", "grid must be sorted")
        _check(len(set(values)) == len(values), "sweep.values", "grid has duplicate values")
        if s.variable == "swing":
            _check(all(v > 0 for v in values), "sweep.values", "swings must be positive")
        pen = self.penalty
        _check(pen.source in ("chain", "tanh"), "penalty.source", "must be 'chain' or 'tanh'")
        _check(len(pen.snr_db) > 0, "penalty.snr_db", "grid is empty")
        _check(pen.n_symbols >= 1, "penalty.n_symbols", "must be >= 1")
        _check(pen.drive > 0, "penalty.drive", "must be positive")
        _check(self.output.plot_format in ("svg", "pdf", "eps"), "output.plot_format",
               "must be a vector format (svg, pdf, eps)")
        return self


def _check(ok: bool, path: str, message: str) -> None:
    if not ok:
        raise ConfigError(path, message)


def parse_variant(name: str) -> tuple[str, int | None]:
    """``"lut5" -> ("lut", 5)``, ``"sw" -> ("sw", None)``."""
    match = _PD_PATTERN.match(name)
    if match is None:
        raise ConfigError("predistortion.variants", f"unknown variant {name!r}")
    if match.group(2) is not None:
        return "lut", int(match.group(2))
    return match.group(1), None


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items() if v is not None}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _convert(value, hint, path):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union:
        inner = [a for a in args if a is not type(None)]
        if value is None:
            return None
        return _convert(value, inner[0], path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        return tuple(_convert(v, args[0], f"{path}[{k}]") for k, v in enumerate(value))
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(path, "expected a table")
        return _build(hint, value, path)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    raise TypeError(f"unsupported config type {hint!r}")


def _build(cls, data: dict, prefix: str = ""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{prefix}.{key}" if prefix else key, "unknown key")
    kwargs = {}
    for name in names:
        if name in data:
            path = f"{prefix}.{name}" if prefix else name
            kwargs[name] = _convert(data[name], hints[name], path)
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data).validate()


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from exc
    try:
        data = tomlkit.parse(text).unwrap()
    except Exception as exc:  # tomlkit raises several parse error types
        raise ConfigError(str(path), f"invalid TOML: {exc}") from exc
    try:
        return config_from_dict(data)
    except SeqDpdError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(path), str(exc)) from exc


def dump_config(cfg: ExperimentConfig) -> str:
    """Fully resolved configuration as TOML (``inf`` written as a float literal)."""
    data = cfg.to_dict()
    data["sweep"]["values"] = list(cfg.sweep_values())
    return tomlkit.dumps(_toml_safe(data))


def _toml_safe(value):
    if isinstance(value, dict):
        return {k: _toml_safe(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_toml_safe(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value
