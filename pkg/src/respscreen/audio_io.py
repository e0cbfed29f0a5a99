"""WAV decoding, resampling, and silence trimming.

Everything downstream operates on mono float segments in [-1, 1] at
22050 Hz; this module produces them from raw RIFF/WAVE byte streams.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import resample_poly

from .errors import MalformedWav, SilentSample, UnsupportedEncoding

TARGET_SAMPLE_RATE = 22050

# Trim parameters: frame RMS compared against peak frame RMS.
TRIM_FRAME_LENGTH = 2048
TRIM_HOP_LENGTH = 512
TRIM_THRESHOLD_DB = 60.0


@dataclass(frozen=True)
class AudioSegment:
    """Mono waveform plus its sample rate."""

    samples: np.ndarray  # float64, amplitudes in [-1, 1]
    sample_rate: int

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def decode_wav(data: bytes) -> AudioSegment:
    """Decode a RIFF/WAVE byte stream (PCM16 or float32, mono or stereo).

    Stereo is downmixed by per-frame channel average; 16-bit integers are
    scaled by 1/32768.
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedWav("not a RIFF/WAVE stream")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise MalformedWav("fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise MalformedWav("data chunk truncated")
            payload = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise MalformedWav("missing fmt or data chunk")

    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if n_channels not in (1, 2):
        raise UnsupportedEncoding(f"{n_channels} channels not supported")
    if sample_rate <= 0:
        raise MalformedWav("non-positive sample rate")

    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 2], dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 4], dtype="<f4")
        samples = raw.astype(np.float64)
    else:
        raise UnsupportedEncoding(f"format={audio_format} bits={bits}")

    if n_channels == 2:
        samples = samples[: len(samples) - len(samples) % 2]
        samples = samples.reshape(-1, 2).mean(axis=1)
    if len(samples) == 0:
        raise MalformedWav("empty data chunk")
    return AudioSegment(np.clip(samples, -1.0, 1.0), sample_rate)


def encode_wav(seg: AudioSegment) -> bytes:
    """Encode a segment as 16-bit PCM mono WAV."""
    pcm = np.clip(np.round(seg.samples * 32768.0), -32768, 32767).astype("<i2")
    body = pcm.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(body),
        b"WAVE",
        b"fmt ",
        16,
        1,  # PCM
        1,  # mono
        seg.sample_rate,
        seg.sample_rate * 2,
        2,
        16,
        b"data",
        len(body),
    )
    return header + body


def resample(seg: AudioSegment, target_rate: int) -> AudioSegment:
    """Band-limited resampling (polyphase windowed-sinc).

    Output length is round(len * target / source); identity when the
    rates are already equal.
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == seg.sample_rate:
        return seg
    ratio = Fraction(target_rate, seg.sample_rate)
    out = resample_poly(seg.samples, ratio.numerator, ratio.denominator)
    n_out = round(len(seg.samples) * target_rate / seg.sample_rate)
    if len(out) > n_out:
        out = out[:n_out]
    elif len(out) < n_out:
        out = np.pad(out, (0, n_out - len(out)), mode="edge")
    return AudioSegment(np.clip(out, -1.0, 1.0), target_rate)


def _frame_rms(x: np.ndarray, frame_length: int, hop_length: int) -> np.ndarray:
    """RMS per frame over non-centered frames covering the signal."""
    n = len(x)
    starts = np.arange(0, max(n, 1), hop_length)  # partial tail frames included
    out = np.empty(len(starts))
    for i, s in enumerate(starts):
        frame = x[s : s + frame_length]
        out[i] = math.sqrt(float(np.mean(frame**2)))
    return out


def trim_silence(seg: AudioSegment, threshold_db: float = TRIM_THRESHOLD_DB) -> AudioSegment:
    """Drop leading/trailing frames more than `threshold_db` below peak RMS.

    Raises SilentSample when nothing remains.
    """
    if threshold_db <= 0:
        raise ValueError("threshold_db must be positive")
    rms = _frame_rms(seg.samples, TRIM_FRAME_LENGTH, TRIM_HOP_LENGTH)
    peak = rms.max()
    if peak <= 0:
        raise SilentSample("all-zero signal")
    keep = rms > peak * 10.0 ** (-threshold_db / 20.0)
    idx = np.flatnonzero(keep)
    if len(idx) == 0:
        raise SilentSample("nothing above the trim threshold")
    start = idx[0] * TRIM_HOP_LENGTH
    end = min(idx[-1] * TRIM_HOP_LENGTH + TRIM_FRAME_LENGTH, len(seg.samples))
    return AudioSegment(seg.samples[start:end], seg.sample_rate)
