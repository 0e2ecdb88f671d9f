"""Paradigm scheduler and reader/writer of the 15-channel session format.

A session is a (T, 15) float32 matrix:

    cols 0-7   sEMG, microvolts
    cols 8-10  accelerometer x/y/z, g
    col  11    timestamp, ms (2 ms steps at 500 Hz, relative to session start)
    col  12    trigger: active force-mode id 1..12, 0 during rest
    col  13    block id 1..12
    col  14    treadmill speed, km/h, one of {0, 4, 6, 8}

On disk: headerless row-major little-endian float32 (60 bytes per row) plus a
``.meta.json`` sidecar.  The serialisation is canonical: write-read-write
produces byte-identical files.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

FS = 500
N_CHANNELS = 15
ROW_BYTES = N_CHANNELS * 4
SPEEDS_KMH = (0, 4, 6, 8)
N_BLOCKS = 12
N_TRIALS = 12
REST_S = 2.0
ACTIVE_S = 8.0
TRIAL_S = REST_S + ACTIVE_S

COL_EMG = slice(0, 8)
COL_ACCEL = slice(8, 11)
COL_TIME = 11
COL_TRIGGER = 12
COL_BLOCK = 13
COL_SPEED = 14


@dataclass(frozen=True)
class Trial:
    trial_id: int  # equals the force-mode id
    rest_s: float
    active_s: float


@dataclass(frozen=True)
class Block:
    block_id: int
    speed_kmh: int
    trials: tuple[Trial, ...]


@dataclass(frozen=True)
class Schedule:
    blocks: tuple[Block, ...]

    @property
    def total_s(self) -> float:
        return sum(t.rest_s + t.active_s for b in self.blocks for t in b.trials)

    @property
    def n_trials(self) -> int:
        return sum(len(b.trials) for b in self.blocks)


def paradigm_schedule(n_blocks: int = N_BLOCKS, n_trials: int = N_TRIALS) -> Schedule:
    """Standard acquisition schedule: blocks cycle the four speeds three times,
    trials 1..12 run in order inside each block, each 2 s rest + 8 s active."""
    blocks = []
    for b in range(1, n_blocks + 1):
        speed = SPEEDS_KMH[(b - 1) % len(SPEEDS_KMH)]
        trials = tuple(Trial(trial_id=k, rest_s=REST_S, active_s=ACTIVE_S) for k in range(1, n_trials + 1))
        blocks.append(Block(block_id=b, speed_kmh=speed, trials=trials))
    return Schedule(blocks=tuple(blocks))


@dataclass
class Recording:
    """One session matrix plus its sidecar metadata."""

    data: np.ndarray  # (T, 15) float32
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or self.data.shape[1] != N_CHANNELS:
            raise ValidationError(f"expected (T, {N_CHANNELS}) data, got {self.data.shape}")
        self.meta.setdefault("fs", FS)

    @property
    def fs(self) -> int:
        return int(self.meta["fs"])

    def validate(self) -> None:
        """Check the channel-range invariants; list every violation found."""
        problems = []
        trig = self.data[:, COL_TRIGGER]
        if not np.isin(trig, np.arange(0, 13)).all():
            bad = np.unique(trig[~np.isin(trig, np.arange(0, 13))])
            problems.append(f"trigger values outside 0..12: {bad.tolist()}")
        block = self.data[:, COL_BLOCK]
        if not np.isin(block, np.arange(1, 13)).all():
            bad = np.unique(block[~np.isin(block, np.arange(1, 13))])
            problems.append(f"block values outside 1..12: {bad.tolist()}")
        speed = self.data[:, COL_SPEED]
        if not np.isin(speed, np.asarray(SPEEDS_KMH, dtype=np.float32)).all():
            bad = np.unique(speed[~np.isin(speed, np.asarray(SPEEDS_KMH, dtype=np.float32))])
            problems.append(f"speed values outside {SPEEDS_KMH}: {bad.tolist()}")
        ts = self.data[:, COL_TIME]
        if len(ts) > 1 and not (np.diff(ts) > 0).all():
            problems.append("timestamp channel is not strictly increasing")
        for b in np.unique(block):
            sp = np.unique(speed[block == b])
            if len(sp) > 1:
                problems.append(f"block {int(b)} has multiple speeds {sp.tolist()}")
        if problems:
            raise ValidationError("; ".join(problems))


def write_recording(rec: Recording, path) -> Path:
    """Write ``path`` (.dat) and its ``.meta.json`` sidecar."""
    path = Path(path)
    rec.validate()
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(rec.meta)
    meta.setdefault("created_at", time.strftime("%Y-%m-%dT%H:%M:%S"))
    arr = np.ascontiguousarray(rec.data, dtype="<f4")
    path.write_bytes(arr.tobytes(order="C"))
    path.with_suffix(".meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return path


def read_recording(path) -> Recording:
    """Read a ``.dat`` file and its sidecar back into a Recording."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) % ROW_BYTES != 0:
        good = len(raw) - len(raw) % ROW_BYTES
        raise FormatError(
            f"{path}: size {len(raw)} is not a multiple of {ROW_BYTES}; "
            f"trailing partial row starts at byte offset {good}"
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(-1, N_CHANNELS)
    sidecar = path.with_suffix(".meta.json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    rec = Recording(data=data.copy(), meta=meta)
    rec.validate()
    return rec


def session_path(root, subject_id: int, day_id: int) -> Path:
    """Canonical layout: data/S{subject:02}/D{day}/session.dat"""
    return Path(root) / f"S{subject_id:02d}" / f"D{day_id}" / "session.dat"


@dataclass(frozen=True)
class TrialSegment:
    """Index ranges of one extracted trial: [baseline) rest then [active) run."""

    trial_id: int
    block: int
    speed: int
    baseline_slice: slice
    active_slice: slice


def extract_trials(rec: Recording, min_active_s: float = 1.0) -> tuple[list[TrialSegment], list[str]]:
    """Locate every maximal trigger>0 run with its preceding rest period.

    Runs shorter than ``min_active_s`` are excluded and reported in the
    returned warning list.  The result is unaffected by trigger-0 padding
    before or after the session.
    """
    trig = rec.data[:, COL_TRIGGER].astype(np.int64)
    block = rec.data[:, COL_BLOCK].astype(np.int64)
    speed = rec.data[:, COL_SPEED].astype(np.int64)
    fs = rec.fs

    boundaries = np.flatnonzero(np.diff(trig) != 0) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [len(trig)]))

    trials: list[TrialSegment] = []
    warnings: list[str] = []
    for i, (s, e) in enumerate(zip(starts, ends)):
        k = trig[s]
        if k == 0:
            continue
        if (e - s) < min_active_s * fs:
            warnings.append(
                f"trigger run of mode {int(k)} at sample {int(s)} lasts "
                f"{(e - s) / fs:.3f} s (< {min_active_s} s); excluded as malformed"
            )
            continue
        # Rest period: the contiguous trigger==0 run immediately before s.
        prev_zero_start = s
        if i > 0 and trig[starts[i - 1]] == 0:
            prev_zero_start = starts[i - 1]
        trials.append(
            TrialSegment(
                trial_id=int(k),
                block=int(block[s]),
                speed=int(speed[s]),
                baseline_slice=slice(int(prev_zero_start), int(s)),
                active_slice=slice(int(s), int(e)),
            )
        )
    return trials, warnings
