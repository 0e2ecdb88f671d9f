"""Surrogate sEMG generator and simulated wristband.

The signal model: each active finger drives an independent band-limited
Gaussian process (unit RMS, finger-specific sub-band of 20-150 Hz) spread
across the 8 channels by a non-negative spatial gain row.  Motion artifacts
are low-frequency (< 20 Hz) noise whose gain grows with treadmill speed, on
top of a white sensor noise floor.  Force intensity saturates as
1 - exp(-3 * intensity).

Day-to-day wear differences are modelled as a circular rotation of the gain
columns (``wearing_shift``); subject-to-subject differences as seeded jitter
of the gains and of the per-finger sub-bands.  Noise draws depend on
(seed, subject) only, never on the day, so a shifted session equals the
unshifted one with channels rotated when noise terms are disabled.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal as _sig

from .errors import ArgumentError, ConfigError
from .protocol import Frame, encode_frame, physical_to_counts
from .recording import (
    COL_BLOCK,
    COL_SPEED,
    COL_TIME,
    COL_TRIGGER,
    FS,
    N_CHANNELS,
    Recording,
    Schedule,
    paradigm_schedule,
)

FINGERS = ("thumb", "index", "middle", "ring", "little")

# Force-mode table: 1 rest, 2-6 single fingers, 7-12 declared combinations.
MODE_FINGERS: dict[int, frozenset[str]] = {
    1: frozenset(),
    2: frozenset({"thumb"}),
    3: frozenset({"index"}),
    4: frozenset({"middle"}),
    5: frozenset({"ring"}),
    6: frozenset({"little"}),
    7: frozenset({"thumb", "index"}),
    8: frozenset({"index", "middle"}),
    9: frozenset({"middle", "ring"}),
    10: frozenset({"ring", "little"}),
    11: frozenset({"thumb", "middle"}),
    12: frozenset({"index", "ring"}),
}


@dataclass(frozen=True)
class ForceMode:
    id: int
    active_fingers: frozenset[str]

    def __post_init__(self):
        if not 1 <= self.id <= 12:
            raise ConfigError(f"force mode id {self.id} outside 1..12")
        bad = self.active_fingers - set(FINGERS)
        if bad:
            raise ConfigError(f"unknown fingers {sorted(bad)}")
        n = len(self.active_fingers)
        if self.id == 1 and n != 0:
            raise ConfigError("mode 1 is rest: no active fingers allowed")
        if 2 <= self.id <= 6 and n != 1:
            raise ConfigError(f"mode {self.id} must use exactly one finger")
        if self.id >= 7 and n < 2:
            raise ConfigError(f"mode {self.id} must combine at least two fingers")


def force_mode(mode_id: int) -> ForceMode:
    """Canonical mode table lookup."""
    if mode_id not in MODE_FINGERS:
        raise ConfigError(f"force mode id {mode_id} outside 1..12")
    return ForceMode(id=mode_id, active_fingers=MODE_FINGERS[mode_id])


def _default_gain_matrix() -> np.ndarray:
    # Circular Gaussian bump per finger; distinct argmax channels and distinct
    # peak amplitudes so total power carries finger information too.
    centers = np.array([0, 2, 3, 5, 6])
    peaks = np.array([28.0, 24.0, 32.0, 30.0, 26.0])  # microvolt RMS at bump peak
    sigma = 1.5
    ch = np.arange(8)
    d = np.abs(ch[None, :] - centers[:, None])
    d = np.minimum(d, 8 - d)  # circular channel distance
    return peaks[:, None] * np.exp(-(d**2) / (2 * sigma**2))


def _default_finger_bands() -> np.ndarray:
    # Finger-specific sub-bands of the 20-150 Hz sEMG band: spectral cues that
    # survive channel rotation.
    return np.array(
        [
            [25.0, 90.0],  # thumb
            [45.0, 115.0],  # index
            [65.0, 140.0],  # middle
            [90.0, 150.0],  # ring
            [25.0, 60.0],  # little
        ]
    )


@dataclass
class SynthConfig:
    seed: int = 0
    fs: int = FS
    gain_matrix: np.ndarray = field(default_factory=_default_gain_matrix)  # 5 fingers x 8 channels
    emg_band: tuple[float, float] = (20.0, 150.0)
    artifact_gain_per_speed: dict[int, float] = field(
        default_factory=lambda: {0: 2.0, 4: 6.0, 6: 12.0, 8: 24.0}
    )
    intensity: float = 1.0
    noise_floor_uv: float = 5.0
    finger_bands: np.ndarray = field(default_factory=_default_finger_bands)
    artifact_band_hz: float = 16.0  # drift lives below this (< 20 Hz)
    # Subject-level variability (applied by subject_params).  Placement is a
    # continuous circular offset of the whole montage: electrode positions
    # differ arbitrarily between subjects, while a new wearing attempt by the
    # same subject only rotates by whole channels (wearing_shift).
    subject_placement_jitter: float = 8.0  # uniform offset range, channels
    subject_finger_jitter: float = 0.3  # per-finger centre wobble, channels
    subject_contact_jitter: float = 0.25  # lognormal sigma per gain entry
    subject_finger_gain_jitter: float = 0.4  # lognormal sigma per finger row
    subject_scale_jitter: float = 0.3
    subject_band_jitter_hz: float = 22.0
    trial_amp_jitter: float = 0.2  # lognormal sigma per finger per trial
    # Accelerometer model
    gait_hz_per_kmh: float = 0.3
    gait_g_per_kmh: float = 0.03
    accel_noise_g: float = 0.004

    def __post_init__(self):
        self.gain_matrix = np.asarray(self.gain_matrix, dtype=float)
        self.finger_bands = np.asarray(self.finger_bands, dtype=float)
        if self.gain_matrix.shape != (5, 8):
            raise ConfigError(f"gain_matrix must be 5x8, got {self.gain_matrix.shape}")
        if np.any(self.gain_matrix < 0):
            raise ConfigError("gain_matrix must be non-negative")
        argmaxes = self.gain_matrix.argmax(axis=1)
        if len(set(argmaxes.tolist())) != 5:
            raise ConfigError(f"finger gain rows must have distinct argmax channels, got {argmaxes}")
        if not 0.0 <= self.intensity <= 1.0:
            raise ConfigError(f"intensity {self.intensity} outside [0, 1]")
        speeds = sorted(self.artifact_gain_per_speed)
        gains = [self.artifact_gain_per_speed[s] for s in speeds]
        if any(b < a for a, b in zip(gains, gains[1:])):
            raise ConfigError(f"artifact gain must be monotone in speed, got {self.artifact_gain_per_speed}")

    def artifact_gain(self, speed_kmh: int) -> float:
        try:
            return self.artifact_gain_per_speed[int(speed_kmh)]
        except KeyError:
            raise ConfigError(
                f"unknown speed {speed_kmh} km/h; configured: {sorted(self.artifact_gain_per_speed)}"
            ) from None


def intensity_effect(intensity: float) -> float:
    """Saturating force-to-amplitude curve."""
    return 1.0 - float(np.exp(-3.0 * intensity))


def _unit_band_noise(rng: np.random.Generator, n: int, band, fs: int, order: int = 4) -> np.ndarray:
    """Band-limited Gaussian noise normalised to unit RMS."""
    m = max(n, 256)  # short pieces: synthesise longer, then trim
    white = rng.standard_normal(m)
    nyq = fs / 2.0
    lo, hi = band
    sos = _sig.butter(order, [lo / nyq, hi / nyq], btype="band", output="sos")
    x = _sig.sosfiltfilt(sos, white)[:n]
    rms = np.sqrt(np.mean(x**2))
    return x / rms if rms > 0 else x


def _unit_lowpass_noise(rng: np.random.Generator, n: int, cutoff_hz: float, fs: int) -> np.ndarray:
    m = max(n, 256)
    white = rng.standard_normal(m)
    sos = _sig.butter(2, cutoff_hz / (fs / 2.0), btype="low", output="sos")
    x = _sig.sosfiltfilt(sos, white)[:n]
    rms = np.sqrt(np.mean(x**2))
    return x / rms if rms > 0 else x


@dataclass(frozen=True)
class SubjectParams:
    gain: np.ndarray  # 5x8, jittered
    bands: np.ndarray  # 5x2, jittered


def _circular_shift_rows(matrix: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Shift each row circularly by a real-valued channel offset (linear interp)."""
    n_ch = matrix.shape[1]
    cols = np.arange(n_ch)
    out = np.empty_like(matrix, dtype=float)
    for r in range(matrix.shape[0]):
        pos = (cols - offsets[r]) % n_ch
        lo = np.floor(pos).astype(int) % n_ch
        hi = (lo + 1) % n_ch
        frac = pos - np.floor(pos)
        out[r] = (1 - frac) * matrix[r, lo] + frac * matrix[r, hi]
    return out


def subject_params(cfg: SynthConfig, subject_id: int) -> SubjectParams:
    """Deterministic per-subject perturbation of the base gain and bands."""
    rng = np.random.default_rng([cfg.seed, 7919, subject_id])
    placement = rng.uniform(0.0, cfg.subject_placement_jitter)
    finger_off = rng.normal(0.0, cfg.subject_finger_jitter, size=5)
    gain = _circular_shift_rows(cfg.gain_matrix, placement + finger_off)
    gain = gain * np.exp(rng.normal(0.0, cfg.subject_contact_jitter, size=gain.shape))
    gain = gain * np.exp(rng.normal(0.0, cfg.subject_finger_gain_jitter, size=5))[:, None]
    gain = gain * float(np.exp(rng.normal(0.0, cfg.subject_scale_jitter)))
    lo_j = rng.normal(0.0, cfg.subject_band_jitter_hz, size=5)
    hi_j = rng.normal(0.0, cfg.subject_band_jitter_hz, size=5)
    bands = cfg.finger_bands.copy()
    bands[:, 0] = np.clip(bands[:, 0] + lo_j, cfg.emg_band[0], cfg.emg_band[1] - 25.0)
    bands[:, 1] = np.clip(bands[:, 1] + hi_j, bands[:, 0] + 15.0, cfg.emg_band[1])
    return SubjectParams(gain=gain, bands=bands)


def _trial_signal(cfg: SynthConfig, mode: ForceMode, speed_kmh: int, n: int,
                  rng: np.random.Generator, gain: np.ndarray, bands: np.ndarray,
                  include_artifacts: bool = True) -> tuple[np.ndarray, np.ndarray]:
    art = cfg.artifact_gain(speed_kmh)  # validates the speed up front
    eff = intensity_effect(cfg.intensity)
    emg = np.zeros((8, n))
    # Canonical finger order keeps RNG consumption deterministic.
    for fi, fname in enumerate(FINGERS):
        if fname not in mode.active_fingers:
            continue
        amp = float(np.exp(rng.normal(0.0, cfg.trial_amp_jitter))) if cfg.trial_amp_jitter else 1.0
        gp = _unit_band_noise(rng, n, bands[fi], cfg.fs)
        emg += amp * eff * gain[fi][:, None] * gp[None, :]
    if include_artifacts:
        for c in range(8):
            emg[c] += art * _unit_lowpass_noise(rng, n, cfg.artifact_band_hz, cfg.fs)
    if cfg.noise_floor_uv > 0:
        emg += cfg.noise_floor_uv * rng.standard_normal((8, n))

    t = np.arange(n) / cfg.fs
    f_gait = cfg.gait_hz_per_kmh * speed_kmh
    a_gait = cfg.gait_g_per_kmh * speed_kmh
    phase = rng.uniform(0, 2 * np.pi, size=3)
    accel = np.zeros((3, n))
    if f_gait > 0:
        for ax in range(3):
            amp = a_gait * (1.0 if ax == 2 else 0.5)
            accel[ax] = amp * np.sin(2 * np.pi * f_gait * t + phase[ax])
    accel[2] += 1.0  # gravity on z
    accel += cfg.accel_noise_g * rng.standard_normal((3, n))
    return emg, accel


def synth_trial(cfg: SynthConfig, mode: ForceMode | int, speed_kmh: int, duration_s: float,
                rng: np.random.Generator | None = None,
                include_artifacts: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Generate one trial: (emg 8xN in microvolts, accel 3xN in g)."""
    if duration_s <= 0:
        raise ArgumentError(f"duration_s must be positive, got {duration_s}")
    if isinstance(mode, int):
        mode = force_mode(mode)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    n = int(round(duration_s * cfg.fs))
    return _trial_signal(cfg, mode, speed_kmh, n, rng, cfg.gain_matrix, cfg.finger_bands,
                         include_artifacts=include_artifacts)


@dataclass(frozen=True)
class Segment:
    """One homogeneous stretch of a session."""

    emg: np.ndarray  # (8, n) microvolts
    accel: np.ndarray  # (3, n) g
    trigger: int
    block_id: int
    speed_kmh: int


def _session_rng(cfg: SynthConfig, subject_id: int) -> np.random.Generator:
    # Deliberately day-independent: the only day-to-day change is wearing_shift.
    return np.random.default_rng([cfg.seed, 104729, subject_id])


def iter_session_segments(cfg: SynthConfig, subject_id: int, wearing_shift: int = 0,
                          schedule: Schedule | None = None):
    """Yield Segment values for a full paradigm session, in schedule order."""
    if not 0 <= wearing_shift <= 7:
        raise ArgumentError(f"wearing_shift {wearing_shift} outside 0..7")
    schedule = schedule or paradigm_schedule()
    sp = subject_params(cfg, subject_id)
    gain = np.roll(sp.gain, wearing_shift, axis=1)
    rng = _session_rng(cfg, subject_id)
    rest = force_mode(1)
    for block in schedule.blocks:
        for trial in block.trials:
            n_rest = int(round(trial.rest_s * cfg.fs))
            n_active = int(round(trial.active_s * cfg.fs))
            emg_r, acc_r = _trial_signal(cfg, rest, block.speed_kmh, n_rest, rng, gain, sp.bands)
            yield Segment(emg_r, acc_r, 0, block.block_id, block.speed_kmh)
            mode = force_mode(trial.trial_id)
            emg_a, acc_a = _trial_signal(cfg, mode, block.speed_kmh, n_active, rng, gain, sp.bands)
            yield Segment(emg_a, acc_a, trial.trial_id, block.block_id, block.speed_kmh)


def synth_session(cfg: SynthConfig, subject_id: int, day_id: int, wearing_shift: int = 0,
                  schedule: Schedule | None = None) -> Recording:
    """Generate a full 12x12 paradigm recording."""
    schedule = schedule or paradigm_schedule()
    parts = list(iter_session_segments(cfg, subject_id, wearing_shift, schedule))
    total = sum(seg.emg.shape[1] for seg in parts)
    data = np.zeros((total, N_CHANNELS), dtype=np.float32)
    pos = 0
    for seg in parts:
        n = seg.emg.shape[1]
        data[pos : pos + n, 0:8] = seg.emg.T
        data[pos : pos + n, 8:11] = seg.accel.T
        data[pos : pos + n, COL_TRIGGER] = seg.trigger
        data[pos : pos + n, COL_BLOCK] = seg.block_id
        data[pos : pos + n, COL_SPEED] = seg.speed_kmh
        pos += n
    data[:, COL_TIME] = np.arange(total, dtype=np.float32) * (1000.0 / cfg.fs)
    meta = {
        "subject_id": int(subject_id),
        "day_id": int(day_id),
        "fs": cfg.fs,
        "seed": int(cfg.seed),
        "wearing_shift": int(wearing_shift),
        "intensity": float(cfg.intensity),
    }
    return Recording(data=data, meta=meta)


def recording_to_frames(rec: Recording) -> list[Frame]:
    """Quantise a recording's signal rows into wire frames (for replay)."""
    frames = []
    for i in range(rec.data.shape[0]):
        emg_counts, accel_counts = physical_to_counts(rec.data[i, 0:8], rec.data[i, 8:11])
        frames.append(Frame(seq=i % 256, emg_counts=emg_counts, accel_counts=accel_counts))
    return frames


class DeviceStream:
    """Simulated wristband: a producer thread emitting frames at a paced rate.

    ``segments`` is a list of (mode_id, speed_kmh, duration_s) generated with
    the config's base gains, or pass ``schedule`` (+ subject_id/wearing_shift)
    for a full paradigm session.  When the consumer falls behind and the
    bounded buffer fills, the oldest frames are dropped and counted.
    """

    def __init__(self, cfg: SynthConfig, segments=None, schedule: Schedule | None = None,
                 subject_id: int = 1, wearing_shift: int = 0,
                 rate_multiplier: float = 1.0, buffer_frames: int = 16384,
                 encoded: bool = False):
        if rate_multiplier <= 0:
            raise ArgumentError(f"rate_multiplier must be positive, got {rate_multiplier}")
        if segments is None and schedule is None:
            raise ArgumentError("provide segments or a schedule")
        self.cfg = cfg
        self.segments = segments
        self.schedule = schedule
        self.subject_id = subject_id
        self.wearing_shift = wearing_shift
        self.rate = cfg.fs * rate_multiplier
        self.encoded = encoded
        self.dropped = 0
        self.produced = 0
        self._buf: deque = deque(maxlen=buffer_frames)
        self._lock = threading.Lock()
        self._have_data = threading.Event()
        self._done = threading.Event()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def _iter_segments(self):
        if self.segments is not None:
            rng = np.random.default_rng(self.cfg.seed)
            for mode_id, speed, duration in self.segments:
                n = int(round(duration * self.cfg.fs))
                emg, acc = _trial_signal(self.cfg, force_mode(mode_id), speed, n, rng,
                                         self.cfg.gain_matrix, self.cfg.finger_bands)
                yield emg, acc
        else:
            for seg in iter_session_segments(self.cfg, self.subject_id, self.wearing_shift, self.schedule):
                yield seg.emg, seg.accel

    def _run(self):
        t0 = time.monotonic()
        i = 0
        batch = max(1, int(self.rate // 100))
        try:
            for emg, acc in self._iter_segments():
                n = emg.shape[1]
                for j in range(n):
                    if self._stop.is_set():
                        return
                    emg_counts, accel_counts = physical_to_counts(emg[:, j], acc[:, j])
                    frame = Frame(seq=i % 256, emg_counts=emg_counts, accel_counts=accel_counts)
                    item = encode_frame(frame) if self.encoded else frame
                    with self._lock:
                        if len(self._buf) == self._buf.maxlen:
                            self.dropped += 1
                        self._buf.append(item)
                        self.produced += 1
                    self._have_data.set()
                    i += 1
                    if i % batch == 0:
                        deadline = t0 + i / self.rate
                        delay = deadline - time.monotonic()
                        if delay > 0:
                            time.sleep(delay)
        finally:
            self._done.set()
            self._have_data.set()

    def start(self):
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    @property
    def finished(self) -> bool:
        with self._lock:
            return self._done.is_set() and not self._buf

    def read(self, max_frames: int = 1 << 30, timeout: float | None = None) -> list:
        """Pop up to ``max_frames`` buffered frames; block up to ``timeout``."""
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            with self._lock:
                if self._buf:
                    out = []
                    while self._buf and len(out) < max_frames:
                        out.append(self._buf.popleft())
                    if not self._buf:
                        self._have_data.clear()
                    return out
                if self._done.is_set():
                    return []
            wait = None if deadline is None else max(0.0, deadline - time.monotonic())
            if wait == 0.0:
                return []
            self._have_data.wait(timeout=wait)


def serve_tcp(cfg: SynthConfig, host: str = "127.0.0.1", port: int = 9750,
              schedule: Schedule | None = None, segments=None,
              rate_multiplier: float = 1.0, max_clients: int | None = None):
    """Listen on TCP and stream encoded frames to every client.

    Returns (server_socket, thread); close the socket to stop accepting.
    Each client gets its own DeviceStream of the same schedule.
    """
    import socket

    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(8)

    def client_loop(conn):
        stream = DeviceStream(cfg, segments=segments, schedule=schedule,
                              rate_multiplier=rate_multiplier, encoded=True).start()
        try:
            while True:
                chunk = stream.read(max_frames=256, timeout=1.0)
                if not chunk:
                    if stream.finished:
                        break
                    continue
                conn.sendall(b"".join(chunk))
        except OSError:
            pass
        finally:
            stream.stop()
            conn.close()

    served = 0

    def accept_loop():
        nonlocal served
        while True:
            try:
                conn, _ = srv.accept()
            except OSError:
                break
            threading.Thread(target=client_loop, args=(conn,), daemon=True).start()
            served += 1
            if max_clients is not None and served >= max_clients:
                break

    thread = threading.Thread(target=accept_loop, daemon=True)
    thread.start()
    return srv, thread


def config_from_json(path) -> SynthConfig:
    """Load a SynthConfig from a JSON file (arrays as nested lists)."""
    import json

    with open(path) as fh:
        raw = json.load(fh)
    if "artifact_gain_per_speed" in raw:
        raw["artifact_gain_per_speed"] = {int(k): float(v) for k, v in raw["artifact_gain_per_speed"].items()}
    return SynthConfig(**raw)


def config_to_json(cfg: SynthConfig, path) -> None:
    import json

    raw = {
        "seed": cfg.seed,
        "fs": cfg.fs,
        "gain_matrix": cfg.gain_matrix.tolist(),
        "emg_band": list(cfg.emg_band),
        "artifact_gain_per_speed": {str(k): v for k, v in cfg.artifact_gain_per_speed.items()},
        "intensity": cfg.intensity,
        "noise_floor_uv": cfg.noise_floor_uv,
        "finger_bands": cfg.finger_bands.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(raw, fh, indent=2)
        fh.write("\n")


def with_intensity(cfg: SynthConfig, intensity: float) -> SynthConfig:
    return replace(cfg, intensity=intensity)
