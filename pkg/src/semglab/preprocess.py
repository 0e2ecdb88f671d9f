"""Segmentation, zero-phase filtering, baseline correction, and split preparation.

The fixed preprocessing chain used by the benchmark harness is:
20-150 Hz band-pass (Butterworth, order 4) + 50 Hz notch (Q=30), both
zero-phase, then per-trial baseline correction against the 2 s rest slice,
then sliding-window segmentation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ArgumentError, EmptySplitError, FilterDesignError

FS = 500

BAND_HZ = (20.0, 150.0)
NOTCH_HZ = 50.0
NOTCH_Q = 30.0
FILTER_ORDER = 4


@dataclass(frozen=True, eq=False)
class Window:
    """One segmented sample with its provenance."""

    samples: np.ndarray  # (8, W) microvolts
    label: int  # force mode 1..12
    block: int
    speed: int
    subject_id: int
    day_id: int
    t_start_ms: float

    def sort_key(self):
        return (self.subject_id, self.day_id, self.block, self.t_start_ms, self.label)


@dataclass(frozen=True)
class SplitSpec:
    """Train/test split selector.

    kind 'single_day': one subject+day; blocks 1-8 train, 9-12 test.
    kind 'cross_day': one subject; day 1 trains, day 2 tests.
    kind 'cross_subject': leave one subject out; remaining subjects train.
    """

    kind: str  # single_day | cross_day | cross_subject
    subject_id: int | None = None
    day_id: int | None = None
    train_blocks: tuple[int, ...] = tuple(range(1, 9))
    test_blocks: tuple[int, ...] = tuple(range(9, 13))
    train_day: int = 1
    test_day: int = 2
    days: tuple[int, ...] = (1,)  # days pooled in cross_subject


def segment_windows(trial_samples: np.ndarray, window_ms: float, step_ms: float, fs: int = FS) -> list[np.ndarray]:
    """Slide a window over (channels, N) samples.

    Starts at 0, step, 2*step, ...; yields floor((N - W) / step) + 1 windows.
    A trial shorter than one window yields an empty list.
    """
    if step_ms <= 0:
        raise ArgumentError(f"step_ms must be positive, got {step_ms}")
    if window_ms <= 0:
        raise ArgumentError(f"window_ms must be positive, got {window_ms}")
    x = np.asarray(trial_samples)
    w = int(round(window_ms * fs / 1000.0))
    step = int(round(step_ms * fs / 1000.0))
    n = x.shape[-1]
    if n < w:
        return []
    count = (n - w) // step + 1
    return [x[..., i * step : i * step + w] for i in range(count)]


def _design(kind: str, cutoffs_hz, order: int, fs: int, q: float):
    nyq = fs / 2.0
    cuts = np.atleast_1d(np.asarray(cutoffs_hz, dtype=float))
    if np.any(cuts <= 0) or np.any(cuts >= nyq):
        raise FilterDesignError(f"cutoffs {cuts.tolist()} must lie strictly inside (0, {nyq}) Hz")
    if kind == "lowpass":
        b, a = signal.butter(order, cuts[0] / nyq, btype="low")
    elif kind == "highpass":
        b, a = signal.butter(order, cuts[0] / nyq, btype="high")
    elif kind == "bandpass":
        if cuts.size != 2 or cuts[0] >= cuts[1]:
            raise FilterDesignError(f"bandpass needs two increasing cutoffs, got {cuts.tolist()}")
        b, a = signal.butter(order, cuts / nyq, btype="band")
    elif kind == "notch":
        b, a = signal.iirnotch(cuts[0], q, fs=fs)
    else:
        raise ArgumentError(f"unknown filter kind {kind!r}")
    poles = np.roots(a)
    if np.any(np.abs(poles) >= 1.0 - 1e-12):
        raise FilterDesignError(f"{kind} design at {cuts.tolist()} Hz is unstable (pole on/outside unit circle)")
    return b, a


def _edge_irlen(a: np.ndarray, eps: float = 1e-13) -> int:
    # Impulse-response length at which the slowest pole has decayed below eps.
    rho = float(np.max(np.abs(np.roots(a))))
    return int(np.ceil(np.log(eps) / np.log(rho)))


def filter_zero_phase(x: np.ndarray, kind: str, cutoffs_hz, order: int = FILTER_ORDER, fs: int = FS, q: float = NOTCH_Q) -> np.ndarray:
    """Forward-backward filtering along the last axis (zero phase).

    Edge transients are removed with Gustafsson initial conditions, which make
    the operation commute exactly with time reversal; the edge window is
    bounded by the filter's own impulse-response decay.
    """
    x = np.asarray(x, dtype=float)
    b, a = _design(kind, cutoffs_hz, order, fs, q)
    if x.shape[-1] <= 3 * max(order, max(len(a), len(b)) - 1):
        raise ArgumentError(f"signal length {x.shape[-1]} too short for an order-{order} {kind}")
    return signal.filtfilt(b, a, x, axis=-1, method="gust", irlen=_edge_irlen(a))


def bandpass_notch(x: np.ndarray, fs: int = FS) -> np.ndarray:
    """The standard chain's filter stage: 20-150 Hz band-pass then 50 Hz notch."""
    y = filter_zero_phase(x, "bandpass", BAND_HZ, order=FILTER_ORDER, fs=fs)
    return filter_zero_phase(y, "notch", (NOTCH_HZ,), fs=fs)


def baseline_correct(trial: np.ndarray, baseline_len: int) -> np.ndarray:
    """Subtract each channel's mean over its first ``baseline_len`` samples."""
    if baseline_len <= 0:
        raise ArgumentError(f"baseline_len must be positive, got {baseline_len}")
    x = np.asarray(trial, dtype=float)
    if baseline_len > x.shape[-1]:
        raise ArgumentError(f"baseline_len {baseline_len} exceeds trial length {x.shape[-1]}")
    mean = x[..., :baseline_len].mean(axis=-1, keepdims=True)
    return x - mean


def _sorted(ws):
    return sorted(ws, key=lambda w: w.sort_key())


def make_split(dataset: list, spec: SplitSpec) -> tuple[list, list]:
    """Partition windows per the selector; both sides sorted deterministically.

    Works on any objects exposing subject_id / day_id / block (Window or the
    harness's lightweight feature rows).
    """
    if not dataset:
        raise EmptySplitError("dataset is empty")
    if spec.kind == "single_day":
        pool = [w for w in dataset if w.subject_id == spec.subject_id and w.day_id == spec.day_id]
        train = [w for w in pool if w.block in spec.train_blocks]
        test = [w for w in pool if w.block in spec.test_blocks]
    elif spec.kind == "cross_day":
        pool = [w for w in dataset if w.subject_id == spec.subject_id]
        train = [w for w in pool if w.day_id == spec.train_day]
        test = [w for w in pool if w.day_id == spec.test_day]
    elif spec.kind == "cross_subject":
        pool = [w for w in dataset if w.day_id in spec.days]
        train = [w for w in pool if w.subject_id != spec.subject_id]
        test = [w for w in pool if w.subject_id == spec.subject_id]
    else:
        raise ArgumentError(f"unknown split kind {spec.kind!r}")
    if not train or not test:
        raise EmptySplitError(f"split {spec.kind} (subject={spec.subject_id}) matched an empty side")
    return _sorted(train), _sorted(test)


def split_manifest(spec: SplitSpec, train: list, test: list) -> dict:
    """JSON-able audit record of a split: selector, counts, and window keys."""

    def side(ws):
        return {
            "count": len(ws),
            "windows": [
                {
                    "subject": w.subject_id,
                    "day": w.day_id,
                    "block": w.block,
                    "label": w.label,
                    "t_start_ms": w.t_start_ms,
                }
                for w in ws
            ],
        }

    return {
        "kind": spec.kind,
        "subject_id": spec.subject_id,
        "day_id": spec.day_id,
        "train": side(train),
        "test": side(test),
    }


def windows_from_recording(rec, window_ms: float, step_ms: float, classes: int = 12,
                           apply_filter: bool = True) -> list[Window]:
    """Run the standard chain over one recording and return labelled windows.

    ``classes`` 6 keeps force modes 1-6 only; 12 keeps all.
    """
    from .recording import COL_EMG, extract_trials

    fs = rec.fs
    emg = rec.data[:, COL_EMG].T.astype(float)  # (8, T)
    if apply_filter:
        emg = bandpass_notch(emg, fs=fs)
    trials, _ = extract_trials(rec)
    out: list[Window] = []
    for t in trials:
        if t.trial_id > classes:
            continue
        base = emg[:, t.baseline_slice]
        active = emg[:, t.active_slice]
        if base.shape[1] == 0:
            corrected = active
        else:
            corrected = active - base.mean(axis=1, keepdims=True)
        t0_ms = t.active_slice.start / fs * 1000.0
        for i, w in enumerate(segment_windows(corrected, window_ms, step_ms, fs=fs)):
            step = int(round(step_ms * fs / 1000.0))
            out.append(
                Window(
                    samples=w,
                    label=t.trial_id,
                    block=t.block,
                    speed=t.speed,
                    subject_id=int(rec.meta.get("subject_id", 0)),
                    day_id=int(rec.meta.get("day_id", 0)),
                    t_start_ms=t0_ms + i * step / fs * 1000.0,
                )
            )
    return out
