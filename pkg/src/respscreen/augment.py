"""Training-set audio augmentation: amplify, white noise, pitch/speed.

Each original expands into six variants (two per method). Parameters are
drawn from the configured ranges with a per-sample seed derived from
(global seed, sample id, method, copy index), so parallel processing
order never changes results. The operators are class-agnostic; the
evaluation pipeline enforces the negatives-only, training-only policy.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioSegment, resample
from .errors import SilentSample

METHODS = ("amplify", "noise", "pitch_speed")


@dataclass(frozen=True)
class AugmentConfig:
    amp_range: tuple[float, float] = (1.15, 2.0)
    rate_range: tuple[float, float] = (0.8, 0.99)
    noise_snr_db_range: tuple[float, float] = (20.0, 40.0)
    copies_per_method: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        for lo, hi in (self.amp_range, self.rate_range, self.noise_snr_db_range):
            if lo > hi:
                raise ValueError("range bounds out of order")
        if self.copies_per_method != 2:
            raise ValueError("the protocol fixes two copies per method")


@dataclass(frozen=True)
class Augmented:
    """One augmented variant plus its provenance."""

    segment: AudioSegment
    method: str
    parameter: float
    copy_index: int


def amplify(seg: AudioSegment, factor: float) -> AudioSegment:
    """Scale by `factor`, hard-clipping to [-1, 1]."""
    return AudioSegment(np.clip(seg.samples * factor, -1.0, 1.0), seg.sample_rate)


def add_white_noise(seg: AudioSegment, snr_db: float, rng: np.random.Generator) -> AudioSegment:
    """Add zero-mean Gaussian noise at the requested signal-to-noise ratio."""
    signal_power = float(np.mean(seg.samples**2))
    if signal_power <= 0:
        raise SilentSample("SNR undefined for a silent signal")
    noise_power = signal_power / 10.0 ** (snr_db / 10.0)
    noise = rng.normal(0.0, np.sqrt(noise_power), size=len(seg.samples))
    return AudioSegment(np.clip(seg.samples + noise, -1.0, 1.0), seg.sample_rate)


def pitch_speed(seg: AudioSegment, rate: float) -> AudioSegment:
    """Playback-rate change: duration becomes len/rate, pitch scales by rate."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    stretched = resample(seg, round(seg.sample_rate / rate))
    return AudioSegment(stretched.samples, seg.sample_rate)


def derive_seed(global_seed: int, sample_id: str, method: str, copy_index: int) -> int:
    """Stable per-variant seed; independent of processing order."""
    key = f"{global_seed}|{sample_id}|{method}|{copy_index}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def augment_six(seg: AudioSegment, sample_id: str, cfg: AugmentConfig) -> list[Augmented]:
    """Two amplified + two noised + two pitch/speed variants of one segment."""
    out: list[Augmented] = []
    for method in METHODS:
        for copy_index in range(cfg.copies_per_method):
            rng = np.random.default_rng(derive_seed(cfg.rng_seed, sample_id, method, copy_index))
            if method == "amplify":
                factor = rng.uniform(*cfg.amp_range)
                out.append(Augmented(amplify(seg, factor), method, factor, copy_index))
            elif method == "noise":
                snr = rng.uniform(*cfg.noise_snr_db_range)
                out.append(Augmented(add_white_noise(seg, snr, rng), method, snr, copy_index))
            else:
                rate = rng.uniform(*cfg.rate_range)
                out.append(Augmented(pitch_speed(seg, rate), method, rate, copy_index))
    return out
