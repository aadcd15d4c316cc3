"""Waveform I/O and resampling.

All audio inside the package is mono float32 at 24 kHz in [-1, 1]; files on
disk are 16-bit PCM WAV.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import EmptyWaveformError, MissingFileError, UnsupportedRateError

SAMPLE_RATE = 24_000
SUPPORTED_RATES = (8_000, 16_000, 22_050, 24_000, 44_100, 48_000)

_INT16_SCALE = 32_767.0


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a mono 16-bit PCM WAV file as float32 in [-1, 1].

    Returns (waveform, sample_rate). Multi-channel files are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"audio file not found: {path}")
    sr, data = wavfile.read(path)
    if data.ndim != 1:
        raise ValueError(f"expected mono audio, got shape {data.shape}: {path}")
    if data.dtype != np.int16:
        raise ValueError(f"expected 16-bit PCM, got dtype {data.dtype}: {path}")
    return data.astype(np.float32) / _INT16_SCALE, int(sr)


def write_wav(path: str | Path, wave: np.ndarray, sr: int = SAMPLE_RATE) -> None:
    """Write a float waveform as mono 16-bit PCM, clipping to [-1, 1]."""
    wave = np.asarray(wave, dtype=np.float64)
    pcm = np.clip(np.round(wave * _INT16_SCALE), -32768, 32767).astype(np.int16)
    wavfile.write(Path(path), sr, pcm)


def resample(wave: np.ndarray, sr_in: int, sr_out: int = SAMPLE_RATE) -> np.ndarray:
    """Band-limited polyphase resampling.

    Output length is round(len(wave) * sr_out / sr_in) with halves rounded up.
    A matching input rate is a bit-identical passthrough.
    """
    if sr_in not in SUPPORTED_RATES:
        raise UnsupportedRateError(f"sample rate {sr_in} not in {SUPPORTED_RATES}")
    if sr_out not in SUPPORTED_RATES:
        raise UnsupportedRateError(f"sample rate {sr_out} not in {SUPPORTED_RATES}")
    wave = np.asarray(wave, dtype=np.float32)
    if wave.size == 0:
        raise EmptyWaveformError("cannot resample an empty waveform")
    if sr_in == sr_out:
        return wave
    g = math.gcd(sr_in, sr_out)
    out = resample_poly(wave.astype(np.float64), sr_out // g, sr_in // g)
    # resample_poly yields ceil(n*up/down) samples; trim to the rounded length.
    target = int(math.floor(wave.size * sr_out / sr_in + 0.5))
    return out[:target].astype(np.float32)
