"""Streaming decoder and response-time measurement.

A sliding window of the last ``window_ms`` of decoded samples is classified
every ``step_ms``; per cue, the first non-resting prediction stamps t3 and
the response time is t3 - t0 - reaction_const (the human reaction share of
the latency, measured separately by the keypress calibrator).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import models as M
from .errors import ArgumentError, CalibrationError
from .features import features_from_samples
from .preprocess import bandpass_notch
from .protocol import Frame, counts_to_physical, physical_to_counts
from .synth import SynthConfig

FS = 500
REACTION_CONST_S = 0.4


def calibrate_reaction(keypress_latencies_s) -> float:
    """Trimmed mean (drop top and bottom 10%) of keypress latencies."""
    vals = np.asarray(list(keypress_latencies_s), dtype=float)
    if vals.size < 10:
        raise CalibrationError(f"need >= 10 latency samples, got {vals.size}")
    k = int(0.1 * vals.size)
    trimmed = np.sort(vals)[k : vals.size - k] if k else np.sort(vals)
    return float(trimmed.mean())


class SampleRing:
    """Fixed-capacity ring of (channels, t) samples with absolute indexing."""

    def __init__(self, n_channels: int, capacity: int):
        self.capacity = capacity
        self.buf = np.zeros((n_channels, capacity))
        self.total = 0  # samples ever written

    def push(self, samples: np.ndarray) -> None:
        n = samples.shape[1]
        if n >= self.capacity:
            self.buf[:] = samples[:, -self.capacity :]
            self.total += n
            return
        pos = self.total % self.capacity
        first = min(n, self.capacity - pos)
        self.buf[:, pos : pos + first] = samples[:, :first]
        if n > first:
            self.buf[:, : n - first] = samples[:, first:]
        self.total += n

    def window_ending_at(self, end: int, length: int) -> np.ndarray:
        """Samples [end-length, end); end must be within the retained history."""
        if end > self.total or end - length < self.total - self.capacity or length > self.capacity:
            raise ArgumentError("requested window is outside the retained history")
        start = end - length
        pos = start % self.capacity
        first = min(length, self.capacity - pos)
        out = np.empty((self.buf.shape[0], length))
        out[:, :first] = self.buf[:, pos : pos + first]
        if length > first:
            out[:, first:] = self.buf[:, : length - first]
        return out


class WindowPipeline:
    """Window-level preprocessing + features + classification.

    Shared by the live decoder and the offline replay path so both produce
    bit-identical predictions for identical samples.
    """

    def __init__(self, model: M.TrainedModel, fs: int = FS):
        self.model = model
        self.fs = fs

    def features(self, samples: np.ndarray) -> np.ndarray:
        filtered = bandpass_notch(np.asarray(samples, dtype=float), fs=self.fs)
        return features_from_samples(filtered, fs=self.fs)

    def predict(self, samples: np.ndarray) -> int:
        feats = self.features(samples)
        return int(M.predict(self.model, feats[None, :])[0])


@dataclass(frozen=True)
class StepPrediction:
    t_s: float  # stream time at the window's last sample
    label: int
    latency_s: float  # wall-clock inference cost of this step


class OnlineDecoder:
    """Frame consumer: ring buffer + fixed-step sliding-window inference."""

    def __init__(self, model: M.TrainedModel, window_ms: float = 250, step_ms: float = 250,
                 fs: int = FS):
        if window_ms <= 0 or step_ms <= 0:
            raise ArgumentError("window_ms and step_ms must be positive")
        self.pipeline = WindowPipeline(model, fs=fs)
        self.fs = fs
        self.window = int(round(window_ms * fs / 1000.0))
        self.step = int(round(step_ms * fs / 1000.0))
        self.ring = SampleRing(8, capacity=max(4 * self.window, self.window + 8 * self.step))
        self.next_at = self.window

    def push_frames(self, frames) -> list[StepPrediction]:
        if not frames:
            return []
        emg = np.array([counts_to_physical(f)[0] for f in frames]).T
        return self.push_samples(emg)

    def push_samples(self, emg_uv: np.ndarray) -> list[StepPrediction]:
        self.ring.push(emg_uv)
        out = []
        while self.ring.total >= self.next_at:
            window = self.ring.window_ending_at(self.next_at, self.window)
            t0 = time.perf_counter()
            label = self.pipeline.predict(window)
            latency = time.perf_counter() - t0
            out.append(StepPrediction(t_s=self.next_at / self.fs, label=label, latency_s=latency))
            self.next_at += self.step
        return out


def predict_windows_offline(emg_uv: np.ndarray, model: M.TrainedModel,
                            window_ms: float = 250, step_ms: float = 250, fs: int = FS):
    """Offline counterpart of OnlineDecoder: same windows, same pipeline."""
    from .preprocess import segment_windows

    pipeline = WindowPipeline(model, fs=fs)
    step = int(round(step_ms * fs / 1000.0))
    w = int(round(window_ms * fs / 1000.0))
    out = []
    for i, win in enumerate(segment_windows(emg_uv, window_ms, step_ms, fs=fs)):
        out.append(StepPrediction(t_s=(i * step + w) / fs, label=pipeline.predict(win), latency_s=0.0))
    return out


class SimulatedSubject:
    """Pull-based frame source that switches force mode a reaction time after
    each cue.  Activation starts exactly one reaction time after the cue and
    ramps to full contraction over ``onset_ramp_s`` (muscles do not step)."""

    def __init__(self, cfg: SynthConfig, seed: int = 0, reaction_s: float = REACTION_CONST_S,
                 speed_kmh: int = 0, rest_mode: int = 1, subject_id: int | None = None,
                 wearing_shift: int = 0, onset_ramp_s: float = 0.25):
        from dataclasses import replace

        from .synth import _trial_signal, force_mode, subject_params

        self.cfg = cfg
        self.quiet_cfg = replace(
            cfg,
            noise_floor_uv=0.0,
            artifact_gain_per_speed={k: 0.0 for k in cfg.artifact_gain_per_speed},
            accel_noise_g=0.0,
        )
        self.reaction_s = reaction_s
        self.speed = speed_kmh
        self.rest_mode = rest_mode
        self.current_mode = rest_mode
        self.mode_started_at = 0
        self.ramp_samples = max(1, int(round(onset_ramp_s * cfg.fs)))
        self.pending: list[tuple[int, int]] = []  # (switch_at_sample, mode)
        self.generated = 0
        self.rng = np.random.default_rng([cfg.seed, 5077, seed])
        self.finished = False
        self._trial_signal = _trial_signal
        self._force_mode = force_mode
        if subject_id is None:
            self._gain, self._bands = cfg.gain_matrix, cfg.finger_bands
        else:
            sp = subject_params(cfg, subject_id)
            self._gain = np.roll(sp.gain, wearing_shift, axis=1)
            self._bands = sp.bands

    def cue(self, mode_id: int) -> None:
        switch_at = self.generated + int(round(self.reaction_s * self.cfg.fs))
        self.pending.append((switch_at, mode_id))

    def _segment(self, mode: int, n: int) -> np.ndarray:
        # Background (noise + artifacts) plus a ramp-enveloped finger component.
        background, _ = self._trial_signal(self.cfg, self._force_mode(self.rest_mode),
                                           self.speed, n, self.rng, self._gain, self._bands)
        if mode == self.rest_mode:
            return background
        fingers, _ = self._trial_signal(self.quiet_cfg, self._force_mode(mode),
                                        self.speed, n, self.rng, self._gain, self._bands)
        t = np.arange(self.generated, self.generated + n)
        env = np.clip((t - self.mode_started_at) / self.ramp_samples, 0.0, 1.0)
        return background + env[None, :] * fingers

    def read(self, max_frames: int = 1 << 30, timeout: float | None = None) -> list[Frame]:
        n = min(max_frames, self.cfg.fs)  # generate at most 1 s per call
        frames: list[Frame] = []
        while n > 0:
            next_switch = None
            for at, mode in sorted(self.pending):
                if at > self.generated:
                    next_switch = at
                    break
                if mode != self.current_mode:
                    self.current_mode = mode
                    self.mode_started_at = at
                self.pending.remove((at, mode))
            span = n if next_switch is None else min(n, next_switch - self.generated)
            emg = self._segment(self.current_mode, span)
            for j in range(span):
                e_counts, a_counts = physical_to_counts(emg[:, j], (0.0, 0.0, 1.0))
                frames.append(Frame(seq=(self.generated + j) % 256,
                                    emg_counts=e_counts, accel_counts=a_counts))
            self.generated += span
            n -= span
        return frames


@dataclass
class OnlineTrialResult:
    cued_mode: int
    predicted_mode: int | None
    t0_s: float
    t3_s: float | None
    reaction_const_s: float
    delta_t_s: float | None
    correct: bool
    timed_out: bool = False

    @property
    def reaction_miscalibrated(self) -> bool:
        # Negative response time: flagged, never clamped.
        return self.delta_t_s is not None and self.delta_t_s < 0


@dataclass
class OnlineSessionResult:
    trials: list = field(default_factory=list)
    aborted: bool = False  # stream underrun: partial results
    stream_ended: bool = False
    step_latencies_s: list = field(default_factory=list)

    @property
    def completed(self) -> int:
        return sum(1 for t in self.trials if not t.timed_out)

    @property
    def timeouts(self) -> int:
        return sum(1 for t in self.trials if t.timed_out)

    @property
    def accuracy(self) -> float:
        done = [t for t in self.trials if not t.timed_out]
        return float(np.mean([t.correct for t in done])) if done else 0.0

    @property
    def mean_delta_t_s(self) -> float | None:
        deltas = [t.delta_t_s for t in self.trials if t.delta_t_s is not None]
        return float(np.mean(deltas)) if deltas else None

    @property
    def max_step_latency_s(self) -> float:
        return max(self.step_latencies_s) if self.step_latencies_s else 0.0


def run_online_session(stream, model: M.TrainedModel, window_ms: float = 250,
                       step_ms: float = 250, n_trials: int = 50, seed: int = 0,
                       reaction_const_s: float = REACTION_CONST_S,
                       trial_timeout_s: float = 4.0, inter_trial_rest_s: float = 1.5,
                       rest_mode: int = 1, underrun_timeout_s: float = 1.0,
                       on_cue=None, on_prediction=None, on_trial=None) -> OnlineSessionResult:
    """Cue random non-rest modes and time the first non-rest prediction.

    ``stream`` must expose read(max_frames, timeout) -> list[Frame]; a cue()
    method, when present, is informed of each prompt (simulated subjects
    react to it; a live wristband stream has a human watching the UI).
    The optional callbacks feed live dashboards.
    """
    rng = np.random.default_rng(seed)
    non_rest = [int(c) for c in model.classes if int(c) != rest_mode]
    if not non_rest:
        raise ArgumentError("model has no non-rest classes to cue")
    decoder = OnlineDecoder(model, window_ms=window_ms, step_ms=step_ms)
    fs = decoder.fs
    step = decoder.step
    result = OnlineSessionResult()

    def pull(n: int) -> list:
        got = stream.read(max_frames=n, timeout=underrun_timeout_s)
        if not got:
            if getattr(stream, "finished", False):
                result.stream_ended = True
            else:
                result.aborted = True
        return got

    def stalled() -> bool:
        return result.aborted or result.stream_ended

    for trial_index in range(n_trials):
        if stalled():
            break
        cued = int(rng.choice(non_rest))
        t0 = decoder.ring.total / fs
        if hasattr(stream, "cue"):
            stream.cue(cued)
        if on_cue:
            on_cue(trial_index, cued, t0)
        trial: OnlineTrialResult | None = None
        while True:
            preds = []
            while not preds:
                frames = pull(step)
                if stalled():
                    break
                preds = decoder.push_frames(frames)
            if stalled():
                break
            for p in preds:
                result.step_latencies_s.append(p.latency_s)
                if on_prediction:
                    on_prediction(p)
                if p.t_s > t0 and p.label != rest_mode:
                    delta = p.t_s - t0 - reaction_const_s
                    trial = OnlineTrialResult(
                        cued_mode=cued, predicted_mode=p.label, t0_s=t0, t3_s=p.t_s,
                        reaction_const_s=reaction_const_s, delta_t_s=delta,
                        correct=(p.label == cued),
                    )
                    break
            if trial is not None:
                break
            if decoder.ring.total / fs - t0 > trial_timeout_s:
                trial = OnlineTrialResult(
                    cued_mode=cued, predicted_mode=None, t0_s=t0, t3_s=None,
                    reaction_const_s=reaction_const_s, delta_t_s=None,
                    correct=False, timed_out=True,
                )
                break
        if trial is None:
            break
        result.trials.append(trial)
        if on_trial:
            on_trial(trial)
        # Let the subject return to rest and the ring flush before the next cue.
        if hasattr(stream, "cue"):
            stream.cue(rest_mode)
        rest_samples = int(round(inter_trial_rest_s * fs))
        drained = 0
        while drained < rest_samples and not stalled():
            frames = pull(min(step, rest_samples - drained))
            if stalled():
                break
            drained += len(frames)
            for p in decoder.push_frames(frames):
                result.step_latencies_s.append(p.latency_s)
    return result
