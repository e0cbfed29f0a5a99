"""Shared spectral primitives: framing, STFT, Mel filterbank, DCT.

Fixed project-wide analysis parameters: 2048-sample frames, hop 512,
periodic Hann window, centered frames with reflect padding, 128 Slaney
mel bands spanning 0 Hz to Nyquist.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy.signal import get_window

from .audio_io import AudioSegment

LOG_FLOOR = 1e-10  # added to power before taking log


@dataclass(frozen=True)
class FrameSpec:
    """Framing parameters for all short-time analysis."""

    frame_length: int = 2048
    hop_length: int = 512
    window: str = "hann"

    def __post_init__(self):
        if not 0 < self.hop_length <= self.frame_length:
            raise ValueError("need 0 < hop_length <= frame_length")


DEFAULT_FRAMES = FrameSpec()


@dataclass(frozen=True)
class Spectrogram:
    """Magnitude spectrogram [n_bins x n_frames] with bin frequencies in Hz."""

    magnitudes: np.ndarray
    bin_frequencies: np.ndarray

    @property
    def n_bins(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[1]


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filters as a weight matrix [n_mels x n_bins]."""

    weights: np.ndarray
    n_mels: int


def _pad_centered(x: np.ndarray, frame_length: int) -> np.ndarray:
    pad = frame_length // 2
    if len(x) > 1:
        # np.pad reflect cannot exceed len-1 per side; chain until done
        out = x
        left = right = pad
        while left > 0 or right > 0:
            l = min(left, len(out) - 1)
            r = min(right, len(out) - 1)
            out = np.pad(out, (l, r), mode="reflect")
            left -= l
            right -= r
        return out
    return np.pad(x, (pad, pad), mode="constant")


def frame_signal(x: np.ndarray, spec: FrameSpec = DEFAULT_FRAMES) -> np.ndarray:
    """Centered, reflect-padded frames as a matrix [frame_length x n_frames]."""
    padded = _pad_centered(np.asarray(x, dtype=np.float64), spec.frame_length)
    n_frames = 1 + (len(padded) - spec.frame_length) // spec.hop_length
    idx = (
        np.arange(spec.frame_length)[:, None]
        + spec.hop_length * np.arange(n_frames)[None, :]
    )
    return padded[idx]


def stft(seg: AudioSegment, spec: FrameSpec = DEFAULT_FRAMES) -> Spectrogram:
    """Magnitude STFT of a segment."""
    frames = frame_signal(seg.samples, spec)
    window = get_window(spec.window, spec.frame_length, fftbins=True)
    mags = np.abs(np.fft.rfft(frames * window[:, None], axis=0))
    freqs = np.fft.rfftfreq(spec.frame_length, d=1.0 / seg.sample_rate)
    return Spectrogram(mags, freqs)


def _hz_to_mel(hz):
    """Slaney mel: linear below 1 kHz, logarithmic above."""
    hz = np.asarray(hz, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    logstep = np.log(6.4) / 27.0
    mel = hz / f_sp
    above = hz >= min_log_hz
    mel = np.where(above, min_log_hz / f_sp + np.log(np.maximum(hz, min_log_hz) / min_log_hz) / logstep, mel)
    return mel


def _mel_to_hz(mel):
    mel = np.asarray(mel, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_mel = 1000.0 / f_sp
    logstep = np.log(6.4) / 27.0
    hz = mel * f_sp
    above = mel >= min_log_mel
    hz = np.where(above, 1000.0 * np.exp(logstep * (mel - min_log_mel)), hz)
    return hz


def mel_filterbank(sr: int, frame_length: int = 2048, n_mels: int = 128) -> MelFilterbank:
    """Triangular filters equally spaced on the Slaney mel scale, 0..sr/2."""
    if n_mels < 1:
        raise ValueError("n_mels must be >= 1")
    n_bins = frame_length // 2 + 1
    fft_freqs = np.fft.rfftfreq(frame_length, d=1.0 / sr)
    mel_pts = np.linspace(_hz_to_mel(0.0), _hz_to_mel(sr / 2.0), n_mels + 2)
    hz_pts = _mel_to_hz(mel_pts)

    weights = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lower, center, upper = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (fft_freqs - lower) / max(center - lower, 1e-12)
        down = (upper - fft_freqs) / max(upper - center, 1e-12)
        weights[m] = np.maximum(0.0, np.minimum(up, down))
        # Slaney area normalization keeps response comparable across bands
        weights[m] *= 2.0 / (upper - lower)
    return MelFilterbank(weights, n_mels)


def mel_power(spec: Spectrogram, fb: MelFilterbank) -> np.ndarray:
    """Mel-band power [n_mels x n_frames]."""
    return fb.weights @ (spec.magnitudes**2)


def log_compress(power: np.ndarray) -> np.ndarray:
    """Natural log of power with a small floor to avoid -inf."""
    return np.log(power + LOG_FLOOR)


def dct_ii(matrix: np.ndarray, n_out: int) -> np.ndarray:
    """Orthonormal DCT-II along axis 0, keeping the first n_out coefficients."""
    if n_out > matrix.shape[0]:
        raise ValueError("n_out must not exceed the input dimension")
    return scipy.fft.dct(matrix, type=2, axis=0, norm="ortho")[:n_out]
