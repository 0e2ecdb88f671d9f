"""Signal-quality metrics: SNR, SMR, and power-spectrum deformation.

SNR   = 20*log10(rms(active_filtered) / rms(rest_filtered)), rms pooled over
        channels.
SMR   = 10*log10(total filtered power / low-frequency excess power of the raw
        signal), where "excess" is the raw PSD above the constant level it has
        at 20 Hz, summed over 0..20 Hz.  A guard of 1e-12 of the total power
        caps the ratio at 120 dB for artifact-free input ("clean").
Omega = 10*log10(sqrt(M2/M0) / (M1/M0)) with spectral moments
        M_i = sum(PSD * f^i) taken over 0..Nyquist.  0 dB for a pure tone,
        10*log10(2/sqrt(3)) ~ 0.625 dB for a flat spectrum, and scale-free.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegenerateInputError
from .features import psd
from .preprocess import bandpass_notch
from .recording import COL_EMG, Recording, extract_trials

MIN_SMR_LEN = 512
ARTIFACT_EDGE_HZ = 20.0
CLEAN_GUARD = 1e-12


def snr(active: np.ndarray, rest: np.ndarray) -> float:
    """Activation-to-rest RMS ratio in dB; both inputs already filtered."""
    active = np.asarray(active, dtype=float)
    rest = np.asarray(rest, dtype=float)
    if active.size == 0 or rest.size == 0:
        raise DegenerateInputError("snr needs non-empty active and rest segments")
    rms_rest = np.sqrt(np.mean(rest**2))
    if rms_rest == 0:
        raise DegenerateInputError("rest segment has zero RMS")
    rms_active = np.sqrt(np.mean(active**2))
    return float(20.0 * np.log10(rms_active / rms_rest))


def _mean_psd(x: np.ndarray, fs: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    powers = []
    freqs = None
    for row in x:
        est = psd(row, fs=fs)
        freqs = est.freqs_hz
        powers.append(est.power)
    return freqs, np.mean(powers, axis=0)


def smr(raw: np.ndarray, filtered: np.ndarray, fs: int = 500) -> float:
    """Signal-to-motion-artifact ratio in dB (capped at 120 dB when clean)."""
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    filtered = np.atleast_2d(np.asarray(filtered, dtype=float))
    if raw.shape[-1] < MIN_SMR_LEN or filtered.shape[-1] < MIN_SMR_LEN:
        raise ArgumentError(f"smr needs >= {MIN_SMR_LEN} samples")
    freqs, p_filt = _mean_psd(filtered, fs)
    _, p_raw = _mean_psd(raw, fs)
    total = float(np.sum(p_filt))
    if total <= 0:
        raise DegenerateInputError("filtered signal has zero power")
    edge_idx = int(np.argmin(np.abs(freqs - ARTIFACT_EDGE_HZ)))
    level = p_raw[edge_idx]
    low = freqs <= ARTIFACT_EDGE_HZ
    artifact = float(np.sum(np.maximum(p_raw[low] - level, 0.0)))
    return float(10.0 * np.log10(total / max(artifact, CLEAN_GUARD * total)))


def smr_is_clean(value_db: float) -> bool:
    """True when smr() hit its guard cap (no measurable low-frequency excess)."""
    return value_db >= 10.0 * np.log10(1.0 / CLEAN_GUARD) - 1e-6


def omega(x: np.ndarray, fs: int = 500) -> float:
    """Power-spectrum deformation in dB; scale-invariant and >= 0."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ArgumentError(f"omega expects a 1-D signal, got shape {x.shape}")
    if x.size < MIN_SMR_LEN:
        raise ArgumentError(f"omega needs >= {MIN_SMR_LEN} samples")
    if not np.any(x):
        raise DegenerateInputError("omega of an all-zero signal is undefined")
    est = psd(x, fs=fs)
    f = est.freqs_hz
    p = est.power
    m0 = float(np.sum(p))
    m1 = float(np.sum(p * f))
    m2 = float(np.sum(p * f**2))
    if m0 <= 0 or m1 <= 0:
        raise DegenerateInputError("spectral moments are degenerate")
    return float(10.0 * np.log10(np.sqrt(m2 / m0) / (m1 / m0)))


@dataclass(frozen=True)
class QualityRow:
    mode_id: int
    snr_db_mean: float
    snr_db_std: float
    smr_db_mean: float
    smr_db_std: float
    omega_db_mean: float
    omega_db_std: float
    per_subject: dict  # subject_id -> (snr, smr, omega)


@dataclass(frozen=True)
class QualityReport:
    rows: tuple[QualityRow, ...]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mode", "SNR", "SMR", "Omega"])
            for r in self.rows:
                w.writerow(
                    [
                        f"mode {r.mode_id}",
                        f"{r.snr_db_mean:.1f} ({r.snr_db_std:.1f})",
                        f"{r.smr_db_mean:.1f} ({r.smr_db_std:.1f})",
                        f"{r.omega_db_mean:.2f} ({r.omega_db_std:.2f})",
                    ]
                )


def _subject_metrics(rec: Recording, modes) -> dict[int, tuple[float, float, float]]:
    """Per-mode (SNR, SMR, Omega) for one session, mode 1 as the rest reference."""
    fs = rec.fs
    raw = rec.data[:, COL_EMG].T.astype(float)
    filt = bandpass_notch(raw, fs=fs)
    trials, _ = extract_trials(rec)
    rest_segs = [filt[:, t.active_slice] for t in trials if t.trial_id == 1]
    if not rest_segs:
        raise DegenerateInputError("no mode-1 (rest) trials found for the SNR reference")
    rest_ref = np.concatenate(rest_segs, axis=1)
    out = {}
    for k in modes:
        segs = [t for t in trials if t.trial_id == k]
        if not segs:
            continue
        snrs, smrs, omegas = [], [], []
        for t in segs:
            snrs.append(snr(filt[:, t.active_slice], rest_ref))
            smrs.append(smr(raw[:, t.active_slice], filt[:, t.active_slice], fs=fs))
            omegas.append(
                float(np.mean([omega(filt[c, t.active_slice], fs=fs) for c in range(filt.shape[0])]))
            )
        out[k] = (float(np.mean(snrs)), float(np.mean(smrs)), float(np.mean(omegas)))
    return out


def quality_report(recordings: list[Recording], modes=(2, 3, 4, 5, 6)) -> QualityReport:
    """Table of per-mode mean (std) across subjects for SNR / SMR / Omega."""
    per_mode: dict[int, dict[int, tuple[float, float, float]]] = {k: {} for k in modes}
    for rec in recordings:
        sid = int(rec.meta.get("subject_id", 0))
        metrics = _subject_metrics(rec, modes)
        for k, vals in metrics.items():
            per_mode[k][sid] = vals
    rows = []
    for k in modes:
        vals = per_mode[k]
        if not vals:
            continue
        arr = np.array(list(vals.values()))  # (subjects, 3)
        rows.append(
            QualityRow(
                mode_id=k,
                snr_db_mean=float(arr[:, 0].mean()),
                snr_db_std=float(arr[:, 0].std()),
                smr_db_mean=float(arr[:, 1].mean()),
                smr_db_std=float(arr[:, 1].std()),
                omega_db_mean=float(arr[:, 2].mean()),
                omega_db_std=float(arr[:, 2].std()),
                per_subject=vals,
            )
        )
    return QualityReport(rows=tuple(rows))
