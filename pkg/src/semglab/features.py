"""Per-window time/frequency features for the traditional classifiers.

Feature layout (the external contract for saved models), per channel:

    [MAV, RMS, MNF, bandpower 20-60, 60-100, 100-150, 150-250 Hz]

concatenated channel-major over the 8 sEMG channels: 56 values total.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as _sig

from .errors import ArgumentError

FS = 500
MIN_PSD_LEN = 64

FEATURE_BANDS = ((20.0, 60.0), (60.0, 100.0), (100.0, 150.0), (150.0, 250.0))
CHANNEL_FEATURES = ("mav", "rms", "mnf") + tuple(f"bp_{int(lo)}_{int(hi)}" for lo, hi in FEATURE_BANDS)
N_CHANNEL_FEATURES = len(CHANNEL_FEATURES)


def feature_names(n_channels: int = 8) -> list[str]:
    return [f"ch{c + 1}_{name}" for c in range(n_channels) for name in CHANNEL_FEATURES]


@dataclass(frozen=True)
class PsdEstimate:
    """One-sided Hann periodogram, density scaling (power per Hz)."""

    freqs_hz: np.ndarray
    power: np.ndarray

    @property
    def df(self) -> float:
        return float(self.freqs_hz[1] - self.freqs_hz[0])

    def total_power(self) -> float:
        return float(np.sum(self.power) * self.df)


def psd(x: np.ndarray, fs: int = FS) -> PsdEstimate:
    """Hann-windowed one-sided periodogram of a 1-D signal."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ArgumentError(f"psd expects a 1-D signal, got shape {x.shape}")
    if x.size < MIN_PSD_LEN:
        raise ArgumentError(f"psd needs >= {MIN_PSD_LEN} samples, got {x.size}")
    freqs, power = _sig.periodogram(x, fs=fs, window="hann", detrend=False, scaling="density")
    return PsdEstimate(freqs_hz=freqs, power=power)


def _psd_batch(x: np.ndarray, fs: int) -> tuple[np.ndarray, np.ndarray]:
    """Hann periodogram over the last axis of an (..., W) stack."""
    w = x.shape[-1]
    win = _sig.get_window("hann", w)
    scale = 1.0 / (fs * np.sum(win**2))
    spec = np.fft.rfft(x * win, axis=-1)
    power = (spec.real**2 + spec.imag**2) * scale
    # One-sided density: double every bin except DC (and Nyquist when W even).
    if w % 2 == 0:
        power[..., 1:-1] *= 2.0
    else:
        power[..., 1:] *= 2.0
    freqs = np.fft.rfftfreq(w, d=1.0 / fs)
    return freqs, power


def features_from_samples(samples: np.ndarray, fs: int = FS) -> np.ndarray:
    """Feature vector for one (channels, W) window; length channels*7."""
    return features_batch(np.asarray(samples, dtype=float)[None, ...], fs=fs)[0]


def features_batch(windows: np.ndarray, fs: int = FS) -> np.ndarray:
    """Vectorised features for an (n, channels, W) stack -> (n, channels*7)."""
    x = np.asarray(windows, dtype=float)
    if x.ndim != 3:
        raise ArgumentError(f"expected (n, channels, W), got shape {x.shape}")
    n, n_ch, w = x.shape
    mav = np.mean(np.abs(x), axis=-1)
    rms = np.sqrt(np.mean(x**2, axis=-1))

    freqs, power = _psd_batch(x, fs)
    df = float(freqs[1] - freqs[0]) if len(freqs) > 1 else 1.0
    total = power.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mnf = (power * freqs).sum(axis=-1) / total
    mnf = np.where(total > 0, mnf, 0.0)  # all-zero window: MNF defined as 0

    bands = np.empty((n, n_ch, len(FEATURE_BANDS)))
    for j, (lo, hi) in enumerate(FEATURE_BANDS):
        if j == len(FEATURE_BANDS) - 1:
            mask = (freqs >= lo) & (freqs <= hi)
        else:
            mask = (freqs >= lo) & (freqs < hi)
        bands[:, :, j] = power[..., mask].sum(axis=-1) * df

    feats = np.concatenate([mav[..., None], rms[..., None], mnf[..., None], bands], axis=-1)
    return feats.reshape(n, n_ch * N_CHANNEL_FEATURES)


def extract_features(window) -> np.ndarray:
    """Feature vector for a preprocess.Window."""
    return features_from_samples(window.samples)


def spectrogram(x: np.ndarray, fs: int = FS, window_ms: float = 256.0, overlap: float = 0.5):
    """Spectrogram data emitter: (freqs_hz, times_s, power) for display layers."""
    nperseg = max(MIN_PSD_LEN, int(round(window_ms * fs / 1000.0)))
    noverlap = int(nperseg * overlap)
    freqs, times, sxx = _sig.spectrogram(np.asarray(x, dtype=float), fs=fs, nperseg=nperseg,
                                         noverlap=noverlap, window="hann", scaling="density")
    return freqs, times, sxx
