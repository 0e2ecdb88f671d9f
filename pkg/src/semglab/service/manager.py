"""Session control: the state machine driving recording and online testing.

Phases: idle -> recording -> idle, idle -> online_test -> idle.  Illegal
transitions raise PhaseConflictError.  The recording path consumes the
full-rate device stream; the display plane gets a 50 Hz decimated copy, so
display drops can never corrupt recorded data.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import models as M
from ..errors import PhaseConflictError
from ..harness import session_feature_arrays
from ..online import REACTION_CONST_S, SimulatedSubject, calibrate_reaction, run_online_session
from ..protocol import counts_to_physical
from ..recording import (
    COL_BLOCK,
    COL_SPEED,
    COL_TIME,
    COL_TRIGGER,
    N_CHANNELS,
    Recording,
    Schedule,
    paradigm_schedule,
    session_path,
    write_recording,
)
from ..synth import MODE_FINGERS, DeviceStream, SynthConfig, synth_session
from .hub import Hub

DISPLAY_DECIMATION = 10


def _mode_text(mode_id: int) -> str:
    fingers = MODE_FINGERS[mode_id]
    if not fingers:
        return "rest"
    order = ("thumb", "index", "middle", "ring", "little")
    return " + ".join(sorted(fingers, key=order.index))


MODE_TEXT = {mid: _mode_text(mid) for mid in MODE_FINGERS}


@dataclass
class ServiceConfig:
    data_dir: Path = Path("data")
    port: int = 9750
    synth_seed: int = 0
    rate_multiplier: float = 1.0  # device pacing; tests crank this up
    online_trials: int = 50
    train_blocks: int = 4  # schedule size for auto-trained online models
    frontend_dir: Path | None = None  # serve the browser app from here if set

    def __post_init__(self):
        self.data_dir = Path(os.environ.get("SEMGLAB_DATA_DIR", self.data_dir))
        self.port = int(os.environ.get("SEMGLAB_PORT", self.port))

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        import json

        with open(path) as fh:
            raw = json.load(fh)
        if "data_dir" in raw:
            raw["data_dir"] = Path(raw["data_dir"])
        return cls(**raw)


@dataclass
class Params:
    window_ms: float = 250.0
    step_ms: float = 250.0
    model_kind: str = "random_forest"


class SessionManager:
    def __init__(self, config: ServiceConfig | None = None):
        self.config = config or ServiceConfig()
        self.hub = Hub()
        self.params = Params()
        self.phase = "idle"
        self.subject_id = 1
        self.day_id = 1
        self.progress = 0.0
        self.block_id = 0
        self.trial_id = 0
        self.reaction_const_s = REACTION_CONST_S
        self._reaction_expected = 0
        self._reaction_latencies: list[float] = []
        self._model: M.TrainedModel | None = None
        self._model_key = None
        self._device: DeviceStream | None = None
        self._worker: threading.Thread | None = None
        self._stop_flag = threading.Event()
        self._lock = threading.RLock()
        self.last_saved: dict | None = None
        self.online_summary: dict | None = None
        self.stream_stats = {"produced": 0, "dropped": 0}

    # ------------------------------------------------------------- status

    def status(self) -> dict:
        with self._lock:
            return {
                "phase": self.phase,
                "subject_id": self.subject_id,
                "day_id": self.day_id,
                "block": self.block_id,
                "trial": self.trial_id,
                "progress": round(self.progress, 6),
                "params": {
                    "window_ms": self.params.window_ms,
                    "step_ms": self.params.step_ms,
                    "model": self.params.model_kind,
                },
                "reaction_const_s": self.reaction_const_s,
                "device": {
                    "source": "synth",
                    "fs": 500,
                    "rate_multiplier": self.config.rate_multiplier,
                    **self.stream_stats,
                },
                "subscribers": self.hub.n_subscribers,
                "last_saved": self.last_saved,
                "online_summary": self.online_summary,
            }

    def _publish_status(self) -> None:
        self.hub.publish({"type": "status", **self.status(), "ts": time.time()})

    def _require_phase(self, expected: str, action: str) -> None:
        if self.phase != expected:
            raise PhaseConflictError(
                f"cannot {action} while phase is {self.phase!r}", phase=self.phase
            )

    # ------------------------------------------------------------- control

    def set_params(self, window_ms=None, step_ms=None, model=None) -> dict:
        with self._lock:
            self._require_phase("idle", "set parameters")
            if window_ms is not None:
                self.params.window_ms = float(window_ms)
            if step_ms is not None:
                self.params.step_ms = float(step_ms)
            if model is not None:
                self.params.model_kind = str(model)
        self._publish_status()
        return self.status()

    def start_session(self, subject_id: int, day_id: int, n_blocks: int = 12,
                      n_trials: int = 12, wearing_shift: int = 0) -> dict:
        with self._lock:
            self._require_phase("idle", "start a recording session")
            self.phase = "recording"
            self.subject_id = int(subject_id)
            self.day_id = int(day_id)
            self.progress = 0.0
            schedule = paradigm_schedule(n_blocks=n_blocks, n_trials=n_trials)
            self._stop_flag.clear()
            self._worker = threading.Thread(
                target=self._recording_worker, args=(schedule, wearing_shift), daemon=True
            )
            self._worker.start()
        self._publish_status()
        return self.status()

    def stop_session(self) -> dict:
        with self._lock:
            if self.phase == "idle":
                return self.status()
            self._stop_flag.set()
            worker = self._worker
        if worker is not None:
            worker.join(timeout=30.0)
        return self.status()

    def start_online(self, n_trials: int | None = None, seed: int = 0) -> dict:
        with self._lock:
            self._require_phase("idle", "start an online test")
            self.phase = "online_test"
            self.online_summary = None
            self._stop_flag.clear()
            self._worker = threading.Thread(
                target=self._online_worker,
                args=(n_trials or self.config.online_trials, seed),
                daemon=True,
            )
            self._worker.start()
        self._publish_status()
        return self.status()

    def reaction_start(self, n: int) -> dict:
        with self._lock:
            self._require_phase("idle", "start a reaction test")
            self._reaction_expected = int(n)
            self._reaction_latencies = []
        self.hub.publish({"type": "reaction_test", "n": int(n), "ts": time.time()})
        return self.status()

    def reaction_submit(self, latencies_s) -> dict:
        with self._lock:
            self._reaction_latencies.extend(float(v) for v in latencies_s)
            done = 0 < self._reaction_expected <= len(self._reaction_latencies)
            if done:
                self.reaction_const_s = calibrate_reaction(self._reaction_latencies)
                self._reaction_expected = 0
        if done:
            self.hub.publish(
                {"type": "reaction_result", "reaction_const_s": self.reaction_const_s, "ts": time.time()}
            )
        return self.status()

    def shutdown(self) -> None:
        self.stop_session()

    # ------------------------------------------------------------- workers

    def _recording_worker(self, schedule: Schedule, wearing_shift: int) -> None:
        cfg = SynthConfig(seed=self.config.synth_seed)
        device = DeviceStream(
            cfg,
            schedule=schedule,
            subject_id=self.subject_id,
            wearing_shift=wearing_shift,
            rate_multiplier=self.config.rate_multiplier,
        ).start()
        self._device = device
        fs = cfg.fs

        # Per-sample paradigm timeline: segment spans aligned with the device.
        spans = []  # (end_sample, trigger, block, speed, trial_id, trial_start, trial_len)
        pos = 0
        for block in schedule.blocks:
            for trial in block.trials:
                n_rest = int(round(trial.rest_s * fs))
                n_active = int(round(trial.active_s * fs))
                t_start = pos
                t_len = n_rest + n_active
                spans.append((pos + n_rest, 0, block.block_id, block.speed_kmh, trial.trial_id, t_start, t_len))
                spans.append((pos + t_len, trial.trial_id, block.block_id, block.speed_kmh, trial.trial_id, t_start, t_len))
                pos += t_len
        total_samples = pos

        rows = np.zeros((total_samples, N_CHANNELS), dtype=np.float32)
        written = 0
        span_i = 0
        decim_carry: list[np.ndarray] = []
        last_prompt = None
        try:
            while written < total_samples and not self._stop_flag.is_set():
                frames = device.read(max_frames=256, timeout=0.5)
                if not frames:
                    if device.finished:
                        break
                    continue
                for f in frames:
                    if written >= total_samples:
                        break
                    while written >= spans[span_i][0]:
                        span_i += 1
                    end, trig, block_id, speed, trial_id, t_start, t_len = spans[span_i]
                    emg, accel = counts_to_physical(f)
                    rows[written, 0:8] = emg
                    rows[written, 8:11] = accel
                    rows[written, COL_TIME] = written * (1000.0 / fs)
                    rows[written, COL_TRIGGER] = trig
                    rows[written, COL_BLOCK] = block_id
                    rows[written, COL_SPEED] = speed
                    prompt_key = (block_id, trial_id)
                    if prompt_key != last_prompt:
                        last_prompt = prompt_key
                        mode_id = trial_id
                        self.block_id, self.trial_id = block_id, trial_id
                        self.hub.publish(
                            {
                                "type": "prompt",
                                "mode_id": mode_id,
                                "text": MODE_TEXT[mode_id],
                                "sound": f"mode-{mode_id}",
                                "block": block_id,
                                "trial": trial_id,
                                "speed": speed,
                                "progress": 0.0,
                                "ts": time.time(),
                            }
                        )
                    in_trial = written - t_start + 1
                    if in_trial % (fs // DISPLAY_DECIMATION) == 0 or in_trial == t_len:
                        self.progress = in_trial / t_len
                        self.hub.publish(
                            {
                                "type": "progress",
                                "value": 1.0 if in_trial == t_len else round(self.progress, 4),
                                "block": block_id,
                                "trial": trial_id,
                                "ts": time.time(),
                            }
                        )
                    decim_carry.append(np.concatenate([emg, accel]))
                    if len(decim_carry) == DISPLAY_DECIMATION:
                        mean = np.mean(decim_carry, axis=0)
                        decim_carry.clear()
                        self.hub.publish(
                            {
                                "type": "signal",
                                "t_ms": written * (1000.0 / fs),
                                "emg": [round(v, 3) for v in mean[:8].tolist()],
                                "accel": [round(v, 5) for v in mean[8:].tolist()],
                                "trigger": int(trig),
                                "block": int(block_id),
                                "speed": int(speed),
                                "ts": time.time(),
                            },
                            plane="display",
                        )
                    written += 1
                self.stream_stats = {"produced": device.produced, "dropped": device.dropped}
        finally:
            device.stop()
            self._device = None
            rec = Recording(
                data=rows[:written],
                meta={"subject_id": self.subject_id, "day_id": self.day_id, "fs": fs,
                      "seed": self.config.synth_seed, "wearing_shift": wearing_shift},
            )
            path = None
            if written:
                path = session_path(self.config.data_dir, self.subject_id, self.day_id)
                write_recording(rec, path)
            with self._lock:
                self.last_saved = {"path": str(path) if path else None, "rows": int(written)}
                self.phase = "idle"
                self.progress = 0.0
            self.hub.publish(
                {"type": "event", "name": "recording_saved", **self.last_saved, "ts": time.time()}
            )
            self._publish_status()

    def _ensure_model(self) -> M.TrainedModel:
        key = (self.params.model_kind, self.params.window_ms, self.params.step_ms, self.subject_id)
        if self._model is not None and self._model_key == key:
            return self._model
        cfg = SynthConfig(seed=self.config.synth_seed)
        sched = paradigm_schedule(n_blocks=self.config.train_blocks)
        rec = synth_session(cfg, subject_id=self.subject_id, day_id=1, schedule=sched)
        table = session_feature_arrays(rec, (self.params.window_ms,), self.params.step_ms)[
            self.params.window_ms
        ]
        mask = table.label <= 6
        from ..features import feature_names

        self._model = M.train(self.params.model_kind, table.X[mask], table.label[mask],
                              seed=1, feature_layout=tuple(feature_names()))
        self._model_key = key
        return self._model

    def _online_worker(self, n_trials: int, seed: int) -> None:
        try:
            model = self._ensure_model()
            cfg = SynthConfig(seed=self.config.synth_seed)
            subject = SimulatedSubject(cfg, seed=seed, subject_id=self.subject_id,
                                       reaction_s=self.reaction_const_s)
            stop_flag = self._stop_flag

            class _Stoppable:
                finished = False

                def cue(self, mode_id):
                    subject.cue(mode_id)

                def read(self, max_frames, timeout=None):
                    if stop_flag.is_set():
                        self.finished = True
                        return []
                    return subject.read(max_frames, timeout)

            stream = _Stoppable()

            def on_cue(i, mode, t0):
                self.trial_id = i + 1
                self.hub.publish(
                    {"type": "prompt", "mode_id": mode, "text": MODE_TEXT[mode],
                     "sound": f"mode-{mode}", "trial": i + 1, "t0_s": t0, "ts": time.time()}
                )

            def on_prediction(p):
                self.hub.publish(
                    {"type": "prediction", "label": p.label, "t_s": p.t_s,
                     "latency_s": round(p.latency_s, 6), "ts": time.time()},
                    plane="display",
                )

            def on_trial(t):
                self.hub.publish(
                    {
                        "type": "trial_result",
                        "cued_mode": t.cued_mode,
                        "predicted_mode": t.predicted_mode,
                        "t0_s": t.t0_s,
                        "t3_s": t.t3_s,
                        "delta_t_ms": None if t.delta_t_s is None else round(t.delta_t_s * 1000.0, 3),
                        "correct": t.correct,
                        "timed_out": t.timed_out,
                        "ts": time.time(),
                    }
                )

            result = run_online_session(
                stream, model,
                window_ms=self.params.window_ms, step_ms=self.params.step_ms,
                n_trials=n_trials, seed=seed, reaction_const_s=self.reaction_const_s,
                on_cue=on_cue, on_prediction=on_prediction, on_trial=on_trial,
            )
            summary = {
                "n_trials": len(result.trials),
                "completed": result.completed,
                "timeouts": result.timeouts,
                "accuracy": result.accuracy,
                "mean_delta_t_ms": None if result.mean_delta_t_s is None else round(result.mean_delta_t_s * 1000.0, 3),
                "max_step_latency_ms": round(result.max_step_latency_s * 1000.0, 3),
                "aborted": result.aborted,
            }
            with self._lock:
                self.online_summary = summary
            self.hub.publish({"type": "event", "name": "online_done", **summary, "ts": time.time()})
        finally:
            with self._lock:
                self.phase = "idle"
            self._publish_status()
