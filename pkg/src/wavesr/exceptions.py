"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class WaveSRError(Exception):
    exit_code = 1


class ConfigError(WaveSRError, ValueError):
    exit_code = 2


class ShapeError(WaveSRError, ValueError):
    exit_code = 2


class AudioIOError(WaveSRError, OSError):
    exit_code = 3


class AudioFormatError(AudioIOError):
    pass


class EmptyInputError(WaveSRError, ValueError):
    """Zero-length, silent or too-short audio, or an empty dataset."""

    exit_code = 3


class DivergenceError(WaveSRError, RuntimeError):
    exit_code = 4

    def __init__(self, message, breakdown=None, checkpoint_path=None):
        super().__init__(message)
        self.breakdown = breakdown
        self.checkpoint_path = checkpoint_path


class CheckpointVersionError(WaveSRError):
    exit_code = 5
