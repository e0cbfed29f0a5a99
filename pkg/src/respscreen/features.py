"""The 477-dimensional handcrafted feature vector.

Layout (canonical order, 4 + 4*11 + 3*13*11 = 477):
  duration, onsets, tempo, period,
  then 11 statistics for each of rms, centroid, rolloff, zcr,
  then 11 statistics for each of 13 MFCC, 13 delta-MFCC, 13 delta2-MFCC.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .audio_io import AudioSegment
from .errors import EmptySeries, TooShort

N_MFCC = 13
N_MELS = 128
DELTA_WIDTH = 9  # frames in the local linear-regression window

STAT_NAMES = ("mean", "median", "rms", "max", "min", "q1", "q3", "iqr", "std", "skew", "kurt")
FRAME_FAMILIES = ("rms", "centroid", "rolloff", "zcr")
SEGMENT_FEATURES = ("duration", "onsets", "tempo", "period")

ROLLOFF_FRACTION = 0.85

# Onset peak picking
ONSET_LOCAL_MAX_RADIUS = 3  # strict local max over +-3 frames
ONSET_MEAN_WINDOW = 11  # moving-mean window (frames)
ONSET_THRESHOLD_FRACTION = 0.3  # of the envelope max, added to the moving mean
ONSET_MIN_SEPARATION_SEC = 0.1

# Tempo search
TEMPO_BPM_MIN = 30.0
TEMPO_BPM_MAX = 300.0
TEMPO_PRIOR_BPM = 120.0
TEMPO_PRIOR_OCTAVES = 1.0

PERIOD_MIN_MODE = 4  # DFT modes below this are dominated by the nonzero mean
PERIOD_MIN_FRAMES = 8


def feature_names() -> list[str]:
    """Canonical 477 feature names, order-stable across runs."""
    names = list(SEGMENT_FEATURES)
    for fam in FRAME_FAMILIES:
        names += [f"{fam}_{s}" for s in STAT_NAMES]
    for fam in ("mfcc", "dmfcc", "d2mfcc"):
        for i in range(N_MFCC):
            names += [f"{fam}{i:02d}_{s}" for s in STAT_NAMES]
    return names

FEATURE_NAMES = tuple(feature_names())
N_FEATURES = len(FEATURE_NAMES)  # 477


@dataclass(frozen=True)
class StatSummary:
    """11 distribution statistics of a frame-level time series."""

    mean: float
    median: float
    rms: float
    max: float
    min: float
    q1: float
    q3: float
    iqr: float
    std: float
    skewness: float
    kurtosis: float

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.mean, self.median, self.rms, self.max, self.min,
            self.q1, self.q3, self.iqr, self.std, self.skewness, self.kurtosis,
        )


@dataclass(frozen=True)
class HandcraftedVector:
    """Named, ordered handcrafted feature vector of length 477."""

    values: np.ndarray
    names: tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        if len(self.values) != len(self.names):
            raise ValueError("value/name length mismatch")

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])


def summarize(series) -> StatSummary:
    """The 11 statistics of a series.

    Quartiles use linear interpolation; std is population (N); skewness is
    the biased Fisher-Pearson coefficient and kurtosis the biased excess.
    Zero-variance series get skewness = kurtosis = 0.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise EmptySeries("cannot summarize an empty series")
    mean = float(np.mean(x))
    std = float(np.std(x))
    m2 = std * std
    if m2 > 0:
        centered = x - mean
        skew = float(np.mean(centered**3)) / m2**1.5
        kurt = float(np.mean(centered**4)) / m2**2 - 3.0
    else:
        skew = kurt = 0.0
    q1, med, q3 = (float(v) for v in np.percentile(x, [25, 50, 75]))
    return StatSummary(
        mean=mean,
        median=med,
        rms=float(np.sqrt(np.mean(x**2))),
        max=float(np.max(x)),
        min=float(np.min(x)),
        q1=q1,
        q3=q3,
        iqr=q3 - q1,
        std=std,
        skewness=skew,
        kurtosis=kurt,
    )


def duration(seg: AudioSegment) -> float:
    """Length in seconds (the segment is assumed already trimmed)."""
    return len(seg) / seg.sample_rate


def onset_envelope(seg: AudioSegment, frames: dsp.FrameSpec = dsp.DEFAULT_FRAMES) -> np.ndarray:
    """Onset strength: per-frame sum of positive log-mel first differences."""
    spec = dsp.stft(seg, frames)
    fb = dsp.mel_filterbank(seg.sample_rate, frames.frame_length, N_MELS)
    logmel = dsp.log_compress(dsp.mel_power(spec, fb))
    diff = np.diff(logmel, axis=1)
    env = np.zeros(logmel.shape[1])
    env[1:] = np.maximum(0.0, diff).sum(axis=0)
    return env


def _pick_peaks(env: np.ndarray, frame_rate: float) -> list[int]:
    if env.size == 0 or env.max() <= 0:
        return []
    threshold = ONSET_THRESHOLD_FRACTION * env.max()
    half = ONSET_MEAN_WINDOW // 2
    padded = np.pad(env, half, mode="edge")
    moving_mean = np.convolve(padded, np.ones(ONSET_MEAN_WINDOW) / ONSET_MEAN_WINDOW, mode="valid")
    min_sep = max(1, round(ONSET_MIN_SEPARATION_SEC * frame_rate))

    peaks: list[int] = []
    r = ONSET_LOCAL_MAX_RADIUS
    for t in range(len(env)):
        lo, hi = max(0, t - r), min(len(env), t + r + 1)
        window = env[lo:hi]
        if env[t] < window.max() or (window == env[t]).sum() > 1:
            continue
        if env[t] <= moving_mean[t] + threshold:
            continue
        if peaks and t - peaks[-1] < min_sep:
            if env[t] > env[peaks[-1]]:
                peaks[-1] = t
            continue
        peaks.append(t)
    return peaks


def onset_count(seg: AudioSegment, frames: dsp.FrameSpec = dsp.DEFAULT_FRAMES) -> int:
    """Number of picked peaks in the onset strength envelope."""
    env = onset_envelope(seg, frames)
    return len(_pick_peaks(env, seg.sample_rate / frames.hop_length))


def tempo(seg: AudioSegment, frames: dsp.FrameSpec = dsp.DEFAULT_FRAMES) -> float:
    """Global tempo (BPM) from the onset envelope autocorrelation.

    Candidate lags in [30, 300] BPM are scored by autocorrelation times a
    log-normal prior centered at 120 BPM with sigma of one octave; returns
    0 for an identically zero envelope.
    """
    env = onset_envelope(seg, frames)
    if env.max() <= 0:
        return 0.0
    frame_rate = seg.sample_rate / frames.hop_length
    env = env - env.mean()
    ac = np.correlate(env, env, mode="full")[len(env) - 1 :]
    min_lag = max(1, int(np.ceil(60.0 * frame_rate / TEMPO_BPM_MAX)))
    max_lag = min(len(ac) - 1, int(np.floor(60.0 * frame_rate / TEMPO_BPM_MIN)))
    if max_lag < min_lag:
        return 0.0
    lags = np.arange(min_lag, max_lag + 1)
    bpms = 60.0 * frame_rate / lags
    prior = np.exp(-0.5 * ((np.log2(bpms) - np.log2(TEMPO_PRIOR_BPM)) / TEMPO_PRIOR_OCTAVES) ** 2)
    scores = ac[lags] * prior
    return float(bpms[int(np.argmax(scores))])


def rms_envelope(seg: AudioSegment, frames: dsp.FrameSpec = dsp.DEFAULT_FRAMES) -> np.ndarray:
    """Per-frame RMS of the magnitude spectrogram (the amplitude envelope)."""
    spec = dsp.stft(seg, frames)
    return np.sqrt(np.mean(spec.magnitudes**2, axis=0))


def envelope_period(seg: AudioSegment, frames: dsp.FrameSpec = dsp.DEFAULT_FRAMES) -> float:
    """Dominant modulation frequency (Hz) of the RMS envelope.

    The envelope spectrum's lowest modes carry the nonzero mean, so the
    argmax is taken over DFT modes >= 4. Returns 0 when the envelope has
    fewer than 8 frames.
    """
    env = rms_envelope(seg, frames)
    if len(env) < PERIOD_MIN_FRAMES:
        return 0.0
    spectrum = np.abs(np.fft.rfft(env))
    if len(spectrum) <= PERIOD_MIN_MODE:
        return 0.0
    frame_rate = seg.sample_rate / frames.hop_length
    k = PERIOD_MIN_MODE + int(np.argmax(spectrum[PERIOD_MIN_MODE:]))
    return k * frame_rate / len(env)


def frame_features(
    seg: AudioSegment, frames: dsp.FrameSpec = dsp.DEFAULT_FRAMES
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-frame (rms, centroid, rolloff, zcr) time series."""
    spec = dsp.stft(seg, frames)
    mags = spec.magnitudes
    freqs = spec.bin_frequencies

    rms = np.sqrt(np.mean(mags**2, axis=0))

    col_sum = mags.sum(axis=0)
    centroid = (freqs[:, None] * mags).sum(axis=0) / np.where(col_sum > 0, col_sum, 1.0)

    energy = mags**2
    cum = np.cumsum(energy, axis=0)
    total = cum[-1]
    target = ROLLOFF_FRACTION * total
    rolloff_idx = np.argmax(cum >= target[None, :], axis=0)
    rolloff = freqs[rolloff_idx]

    raw = dsp.frame_signal(seg.samples, frames)
    signs = np.signbit(raw)
    zcr = np.count_nonzero(signs[1:] != signs[:-1], axis=0) / frames.frame_length

    return rms, centroid, rolloff, zcr


def delta(matrix: np.ndarray, width: int = DELTA_WIDTH) -> np.ndarray:
    """Local linear-regression slope over a `width`-frame window, edge-replicated."""
    half = width // 2
    taps = np.arange(-half, half + 1, dtype=np.float64)
    denom = np.sum(taps**2)
    padded = np.pad(matrix, ((0, 0), (half, half)), mode="edge")
    out = np.zeros_like(matrix, dtype=np.float64)
    for j, n in enumerate(taps):
        out += n * padded[:, j : j + matrix.shape[1]]
    return out / denom


def mfcc_features(
    seg: AudioSegment, frames: dsp.FrameSpec = dsp.DEFAULT_FRAMES
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """MFCC, delta-MFCC and delta2-MFCC matrices, each [13 x n_frames]."""
    spec = dsp.stft(seg, frames)
    fb = dsp.mel_filterbank(seg.sample_rate, frames.frame_length, N_MELS)
    logmel = dsp.log_compress(dsp.mel_power(spec, fb))
    if logmel.shape[1] < DELTA_WIDTH:
        raise TooShort(f"need >= {DELTA_WIDTH} frames, got {logmel.shape[1]}")
    mfcc = dsp.dct_ii(logmel, N_MFCC)
    d1 = delta(mfcc)
    d2 = delta(d1)
    return mfcc, d1, d2


def extract_handcrafted(seg: AudioSegment, frames: dsp.FrameSpec = dsp.DEFAULT_FRAMES) -> HandcraftedVector:
    """Assemble the full 477-entry vector for a trimmed segment."""
    values = [
        duration(seg),
        float(onset_count(seg, frames)),
        tempo(seg, frames),
        envelope_period(seg, frames),
    ]
    for series in frame_features(seg, frames):
        values.extend(summarize(series).as_tuple())
    for matrix in mfcc_features(seg, frames):
        for row in matrix:
            values.extend(summarize(row).as_tuple())
    return HandcraftedVector(np.array(values))
