"""Pattern-LUT and sequence-wise transmitter predistortion lab."""

from .constellation import (
    AmplitudeAlphabet,
    Constellation,
    amplitude_alphabet,
    builtin_constellation,
    load_constellation,
    lut_size,
    save_constellation,
)
from .metrics import MetricReport, constellation_penalty, estimate_snr, extract_centroids, gmi, net_rate
from .predistort import (
    PatternLUT,
    PatternTable,
    SequenceLUT,
    apply_pattern_lut,
    apply_sequence_lut,
    predistorter_storage,
    train_pattern_lut,
    train_sequence_lut,
)
from .sequence import SymbolSequence, generate_frame, lanes, reassemble
from .txchain import LinkChain, NoiseConfig, TransmitterModel, add_awgn, osnr_to_snr, transmit
from .waveform import LinearPrecomp, RrcFilter, Waveform, align, apply_precomp, matched_downsample, rrc_taps, shape

__version__ = "0.1.0"
