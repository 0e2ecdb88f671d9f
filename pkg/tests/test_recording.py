import numpy as np
import pytest

from semglab import recording as rec
from semglab import synth
from semglab.errors import FormatError, ValidationError


@pytest.fixture(scope="module")
def session():
    cfg = synth.SynthConfig(seed=1)
    return synth.synth_session(cfg, subject_id=1, day_id=1)


def test_schedule_speeds_cycle():
    sched = rec.paradigm_schedule()
    speeds = [b.speed_kmh for b in sched.blocks]
    assert speeds == [0, 4, 6, 8] * 3
    assert sched.blocks[4].speed_kmh == 0  # block 5: second round start
    assert sched.blocks[3].speed_kmh == 8  # block 4
    assert sched.n_trials == 144
    for b in sched.blocks:
        assert [t.trial_id for t in b.trials] == list(range(1, 13))
        assert all(t.rest_s + t.active_s == 10.0 for t in b.trials)


def make_recording(t=1000):
    data = np.zeros((t, 15), dtype=np.float32)
    data[:, rec.COL_TIME] = np.arange(t) * 2.0
    data[:, rec.COL_BLOCK] = 1
    data[:, rec.COL_SPEED] = 0
    return rec.Recording(data=data, meta={"subject_id": 3, "day_id": 1, "fs": 500})


def test_write_read_round_trip(tmp_path):
    r = make_recording()
    rng = np.random.default_rng(0)
    r.data[:, :8] = rng.normal(0, 40, (1000, 8)).astype(np.float32)
    path = rec.write_recording(r, tmp_path / "session.dat")
    back = rec.read_recording(path)
    assert np.array_equal(back.data, r.data)
    assert back.meta["subject_id"] == 3 and back.meta["day_id"] == 1
    assert "created_at" in back.meta


def test_canonical_serialization_byte_identical(tmp_path):
    r = make_recording()
    p1 = rec.write_recording(r, tmp_path / "a.dat")
    back = rec.read_recording(p1)
    p2 = rec.write_recording(back, tmp_path / "b.dat")
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.with_suffix(".meta.json").read_bytes() == p2.with_suffix(".meta.json").read_bytes()


def test_file_size_formula(tmp_path):
    # 720000 rows x 15 channels x 4 bytes
    r = rec.Recording(
        data=np.zeros((720000, 15), dtype=np.float32), meta={"fs": 500}
    )
    r.data[:, rec.COL_TIME] = np.arange(720000) * 2.0
    r.data[:, rec.COL_BLOCK] = 1
    path = rec.write_recording(r, tmp_path / "big.dat")
    assert path.stat().st_size == 43_200_000


def test_truncated_file_names_offset(tmp_path):
    r = make_recording()
    path = rec.write_recording(r, tmp_path / "t.dat")
    raw = path.read_bytes()
    path.write_bytes(raw[:-7])
    with pytest.raises(FormatError, match=str(len(raw) - 60)):
        rec.read_recording(path)


def test_out_of_range_channels_listed(tmp_path):
    r = make_recording()
    r.data[10, rec.COL_TRIGGER] = 13
    r.data[20, rec.COL_SPEED] = 5
    with pytest.raises(ValidationError) as ei:
        rec.write_recording(r, tmp_path / "bad.dat")
    msg = str(ei.value)
    assert "13" in msg and "5" in msg


def test_extract_trials_counts(session):
    trials, warnings = rec.extract_trials(session)
    assert len(trials) == 144 and not warnings
    per_block = {}
    for t in trials:
        per_block.setdefault(t.block, []).append(t)
    assert all(len(v) == 12 for v in per_block.values())
    sched = rec.paradigm_schedule()
    for b in sched.blocks:
        assert {t.speed for t in per_block[b.block_id]} == {b.speed_kmh}
    # Baselines are the 2 s rest immediately before each active run.
    for t in trials:
        assert t.baseline_slice.stop == t.active_slice.start
        assert t.baseline_slice.stop - t.baseline_slice.start == 1000
        assert t.active_slice.stop - t.active_slice.start == 4000


def test_extract_trials_empty_and_padding():
    r = make_recording()
    trials, _ = rec.extract_trials(r)
    assert trials == []

    data = np.zeros((3000, 15), dtype=np.float32)
    data[:, rec.COL_TIME] = np.arange(3000) * 2.0
    data[:, rec.COL_BLOCK] = 1
    data[1000:2000, rec.COL_TRIGGER] = 4
    base = rec.Recording(data=data.copy(), meta={"fs": 500})
    padded = rec.Recording(
        data=np.vstack([np.zeros((500, 15), np.float32), data, np.zeros((500, 15), np.float32)]),
        meta={"fs": 500},
    )
    padded.data[:, rec.COL_TIME] = np.arange(4000) * 2.0
    padded.data[:, rec.COL_BLOCK] = 1
    t1, _ = rec.extract_trials(base)
    t2, _ = rec.extract_trials(padded)
    assert len(t1) == len(t2) == 1
    assert t1[0].trial_id == t2[0].trial_id == 4
    span1 = t1[0].active_slice.stop - t1[0].active_slice.start
    span2 = t2[0].active_slice.stop - t2[0].active_slice.start
    assert span1 == span2 == 1000


def test_short_trigger_run_flagged():
    data = np.zeros((3000, 15), dtype=np.float32)
    data[:, rec.COL_TIME] = np.arange(3000) * 2.0
    data[:, rec.COL_BLOCK] = 1
    data[1000:1100, rec.COL_TRIGGER] = 2  # 0.2 s run
    r = rec.Recording(data=data, meta={"fs": 500})
    trials, warnings = rec.extract_trials(r)
    assert trials == [] and len(warnings) == 1 and "malformed" in warnings[0]


def test_session_path_layout(tmp_path):
    p = rec.session_path(tmp_path, 7, 2)
    assert str(p).endswith("S07/D2/session.dat")
