"""Exception types raised across the package."""


class SeqDpdError(Exception):
    """Base class for all package errors."""


# constellation
class ConstellationError(SeqDpdError):
    pass


class DuplicateLabel(ConstellationError):
    pass


class BadCardinality(ConstellationError):
    pass


class BadLabel(ConstellationError):
    pass


class ParseError(ConstellationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownFormat(ConstellationError):
    pass


class EvenPatternLength(SeqDpdError, ValueError):
    pass


# sequence
class LaneMismatch(SeqDpdError, ValueError):
    pass


# waveform
class BadRollOff(SeqDpdError, ValueError):
    pass


class SpectrumMismatch(SeqDpdError, ValueError):
    pass


class ZeroSignal(SeqDpdError, ValueError):
    pass


# predistort
class LevelQuantizationError(SeqDpdError, ValueError):
    pass


class AlignmentError(SeqDpdError):
    pass


class FrameMismatch(SeqDpdError):
    pass


# metrics
class BadNoiseVariance(SeqDpdError, ValueError):
    pass


class MissingPoint(SeqDpdError):
    def __init__(self, labels):
        self.labels = list(labels)
        super().__init__("constellation points never transmitted: " + ", ".join(self.labels))


# harness
class ConfigError(SeqDpdError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
