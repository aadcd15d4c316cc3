"""Spectral features: magnitude STFT and log-mel spectrograms.

Fixed analysis setup: FFT 1024, hop 256, window 1024 (periodic Hann),
center padding by reflection, 80 triangular mel filters (HTK scale) spanning
0 Hz to 12 kHz. The numpy path below is the reference implementation used by
the data pipeline; :func:`mel_spectrogram_torch` mirrors it differentiably
for the reconstruction loss and is tested against the numpy path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import EmptyWaveformError, ShapeMismatchError

N_FFT = 1024
HOP = 256
WIN = 1024
N_FREQ = N_FFT // 2 + 1  # 513
N_MELS = 80
FMIN = 0.0
FMAX = 12_000.0
LOG_FLOOR = 1e-5

_SR = 24_000


@dataclass(frozen=True)
class SpectralFeatures:
    """Linear magnitudes [513 x T] and log-mel [80 x T] of one utterance."""

    linear: np.ndarray
    mel: np.ndarray


def _hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _reflect_pad(wave: np.ndarray, pad: int) -> np.ndarray:
    """Reflect-pad, tiling the reflection for inputs shorter than `pad`."""
    if wave.size > pad:
        return np.pad(wave, pad, mode="reflect")
    if wave.size == 1:
        return np.full(1 + 2 * pad, wave[0], dtype=wave.dtype)
    # np.pad(reflect) needs len > pad; index the mirrored extension directly.
    period = 2 * (wave.size - 1)
    idx = np.arange(-pad, wave.size + pad) % period
    idx = np.where(idx >= wave.size, period - idx, idx)
    return wave[idx]


def frame_count(n_samples: int) -> int:
    """Frames produced for an n-sample waveform: floor(n / hop) + 1."""
    return n_samples // HOP + 1


def linear_spectrogram(wave: np.ndarray) -> np.ndarray:
    """Magnitude STFT of a waveform, shape [513 x frames]."""
    wave = np.asarray(wave, dtype=np.float64)
    if wave.ndim != 1 or wave.size == 0:
        raise EmptyWaveformError("linear_spectrogram needs a non-empty 1-D waveform")
    padded = _reflect_pad(wave, N_FFT // 2)
    n_frames = frame_count(wave.size)
    window = _hann_periodic(WIN)
    frames = np.lib.stride_tricks.sliding_window_view(padded, WIN)[::HOP][:n_frames]
    spec = np.abs(np.fft.rfft(frames * window, n=N_FFT, axis=1))
    return np.ascontiguousarray(spec.T.astype(np.float32))


def mel_filterbank() -> np.ndarray:
    """Triangular HTK-mel filterbank, shape [80 x 513], 0 Hz to 12 kHz."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)

    edges_hz = mel_to_hz(np.linspace(hz_to_mel(FMIN), hz_to_mel(FMAX), N_MELS + 2))
    bin_hz = np.arange(N_FREQ) * (_SR / N_FFT)
    fb = np.zeros((N_MELS, N_FREQ))
    for k in range(N_MELS):
        lo, mid, hi = edges_hz[k], edges_hz[k + 1], edges_hz[k + 2]
        up = (bin_hz - lo) / (mid - lo)
        down = (hi - bin_hz) / (hi - mid)
        fb[k] = np.maximum(0.0, np.minimum(up, down))
    return fb.astype(np.float32)


_MEL_FB = mel_filterbank()


def mel_spectrogram(linear: np.ndarray) -> np.ndarray:
    """Log-compressed mel spectrogram from a magnitude STFT, shape [80 x T].

    Applies the fixed filterbank then log(max(x, 1e-5)).
    """
    linear = np.asarray(linear)
    if linear.ndim != 2 or linear.shape[0] != N_FREQ:
        raise ShapeMismatchError(
            f"expected [{N_FREQ} x T] linear spectrogram, got {linear.shape}"
        )
    mel = _MEL_FB @ linear.astype(np.float64)
    return np.log(np.maximum(mel, LOG_FLOOR)).astype(np.float32)


def extract_features(wave: np.ndarray) -> SpectralFeatures:
    """Linear and log-mel spectrograms of one waveform."""
    linear = linear_spectrogram(wave)
    return SpectralFeatures(linear=linear, mel=mel_spectrogram(linear))


# --- differentiable mirror used by the training loss --------------------------

_MEL_FB_T = torch.from_numpy(_MEL_FB)
_WINDOW_T = torch.from_numpy(_hann_periodic(WIN).astype(np.float32))


def mel_spectrogram_torch(wave: torch.Tensor) -> torch.Tensor:
    """Log-mel of a batch of waveforms [B x N] -> [B x 80 x T], differentiable.

    Same analysis parameters as the numpy path. Inputs shorter than 513
    samples are not supported here (reflect padding); training slices are
    always far longer.
    """
    spec = torch.stft(
        wave,
        n_fft=N_FFT,
        hop_length=HOP,
        win_length=WIN,
        window=_WINDOW_T.to(wave.dtype),
        center=True,
        pad_mode="reflect",
        return_complex=True,
    )
    mag = spec.abs()
    mel = torch.matmul(_MEL_FB_T.to(wave.dtype), mag)
    return torch.log(torch.clamp(mel, min=LOG_FLOOR))
