import socket
import time

import numpy as np
import pytest

from semglab import features as feat
from semglab import protocol as proto
from semglab import recording as rec
from semglab import synth
from semglab.errors import ArgumentError, ConfigError

FS = 500


def quiet_config(seed=5):
    return synth.SynthConfig(
        seed=seed,
        noise_floor_uv=0.0,
        artifact_gain_per_speed={0: 0.0, 4: 0.0, 6: 0.0, 8: 0.0},
        accel_noise_g=0.0,
    )


def test_force_mode_table():
    assert synth.force_mode(1).active_fingers == frozenset()
    for mid in range(2, 7):
        assert len(synth.force_mode(mid).active_fingers) == 1
    for mid in range(7, 13):
        assert len(synth.force_mode(mid).active_fingers) >= 2
    with pytest.raises(ConfigError):
        synth.force_mode(13)
    with pytest.raises(ConfigError):
        synth.ForceMode(id=1, active_fingers=frozenset({"thumb"}))
    with pytest.raises(ConfigError):
        synth.ForceMode(id=9, active_fingers=frozenset({"thumb"}))


def test_config_validation():
    with pytest.raises(ConfigError):
        synth.SynthConfig(intensity=1.5)
    with pytest.raises(ConfigError):
        synth.SynthConfig(gain_matrix=np.ones((5, 8)))  # identical argmax rows
    with pytest.raises(ConfigError):
        synth.SynthConfig(artifact_gain_per_speed={0: 5.0, 4: 1.0, 6: 2.0, 8: 3.0})


def test_trial_determinism():
    cfg = synth.SynthConfig(seed=3)
    a1, acc1 = synth.synth_trial(cfg, 4, 6, 2.0)
    a2, acc2 = synth.synth_trial(cfg, 4, 6, 2.0)
    assert np.array_equal(a1, a2) and np.array_equal(acc1, acc2)


def test_rest_trial_stays_at_noise_floor():
    cfg = synth.SynthConfig(seed=1)
    emg, _ = synth.synth_trial(cfg, 1, 0, 4.0)
    rms = np.sqrt(np.mean(emg**2, axis=1))
    assert np.all(rms <= 3 * cfg.noise_floor_uv)


def test_single_finger_modes_have_distinct_argmax():
    cfg = synth.SynthConfig(seed=7)
    emg2, _ = synth.synth_trial(cfg, 2, 0, 4.0)
    emg6, _ = synth.synth_trial(cfg, 6, 0, 4.0)
    am2 = int(np.argmax(np.sqrt(np.mean(emg2**2, axis=1))))
    am6 = int(np.argmax(np.sqrt(np.mean(emg6**2, axis=1))))
    assert am2 != am6


def test_speed_increases_low_frequency_power():
    cfg = synth.SynthConfig(seed=2)
    emg0, _ = synth.synth_trial(cfg, 1, 0, 8.0)
    emg8, _ = synth.synth_trial(cfg, 1, 8, 8.0)

    def low_power(x):
        est = feat.psd(x[0], fs=FS)
        return est.power[est.freqs_hz < 20].sum()

    assert low_power(emg8) > low_power(emg0)


def test_unknown_speed_rejected():
    cfg = synth.SynthConfig(seed=0)
    with pytest.raises(ConfigError):
        synth.synth_trial(cfg, 2, 5, 1.0)
    with pytest.raises(ArgumentError):
        synth.synth_trial(cfg, 2, 0, 0.0)


def test_band_occupancy():
    cfg = synth.SynthConfig(seed=4, intensity=1.0)
    for mode in (2, 4, 9):
        emg, _ = synth.synth_trial(cfg, mode, 0, 8.0, include_artifacts=False)
        total = in_band = 0.0
        for c in range(8):
            est = feat.psd(emg[c], fs=FS)
            total += est.power.sum()
            in_band += est.power[(est.freqs_hz >= 20) & (est.freqs_hz <= 150)].sum()
        assert in_band / total >= 0.80


def test_intensity_rms_saturating():
    grid = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    rms = []
    for level in grid:
        cfg = synth.with_intensity(synth.SynthConfig(seed=6), level)
        emg, _ = synth.synth_trial(cfg, 4, 0, 4.0)
        rms.append(float(np.sqrt(np.mean(emg**2))))
    diffs = np.diff(rms)
    assert np.all(diffs >= 0)  # non-decreasing
    assert np.all(np.diff(rms, 2) <= 1e-9)  # concave on the grid


def test_session_shape_and_determinism():
    cfg = synth.SynthConfig(seed=1)
    sched = rec.paradigm_schedule(n_blocks=2)
    r1 = synth.synth_session(cfg, subject_id=1, day_id=1, schedule=sched)
    r2 = synth.synth_session(cfg, subject_id=1, day_id=1, schedule=sched)
    assert r1.data.shape == (2 * 12 * 10 * FS, 15)
    assert np.array_equal(r1.data, r2.data)
    r1.validate()


def test_full_session_row_count():
    cfg = synth.SynthConfig(seed=1)
    r = synth.synth_session(cfg, subject_id=1, day_id=1)
    assert r.data.shape[0] == 12 * 12 * 10 * FS == 720000


def test_wearing_shift_rotates_channels():
    cfg = quiet_config()
    sched = rec.paradigm_schedule(n_blocks=1)
    day1 = synth.synth_session(cfg, subject_id=2, day_id=1, wearing_shift=0, schedule=sched)
    day2 = synth.synth_session(cfg, subject_id=2, day_id=2, wearing_shift=1, schedule=sched)
    rms1 = np.sqrt(np.mean(day1.data[:, :8].astype(float) ** 2, axis=0))
    rms2 = np.sqrt(np.mean(day2.data[:, :8].astype(float) ** 2, axis=0))
    assert np.allclose(rms2, np.roll(rms1, 1), rtol=1e-5)
    assert np.allclose(day2.data[:, :8], np.roll(day1.data[:, :8], 1, axis=1))


def test_device_stream_rate():
    cfg = synth.SynthConfig(seed=0)
    stream = synth.DeviceStream(cfg, segments=[(1, 0, 2.0)], rate_multiplier=1.0).start()
    try:
        got = []
        t0 = time.monotonic()
        while time.monotonic() - t0 < 2.0:
            got.extend(stream.read(timeout=0.1))
        assert 990 <= len(got) + 0 <= 1010 or stream.finished
        total = len(got) + len(stream.read(timeout=0.5))
        assert 990 <= total <= 1010
    finally:
        stream.stop()


def test_device_stream_quantization_matches_trial():
    cfg = synth.SynthConfig(seed=9)
    stream = synth.DeviceStream(cfg, segments=[(4, 0, 1.0)], rate_multiplier=200.0).start()
    frames = []
    while True:
        chunk = stream.read(timeout=2.0)
        if not chunk:
            break
        frames.extend(chunk)
    stream.stop()
    emg, accel = synth.synth_trial(cfg, 4, 0, 1.0)
    assert len(frames) == emg.shape[1]
    got_emg = np.array([proto.counts_to_physical(f)[0] for f in frames]).T
    got_acc = np.array([proto.counts_to_physical(f)[1] for f in frames]).T
    assert np.max(np.abs(got_emg - emg)) <= proto.EMG_LSB_UV
    assert np.max(np.abs(got_acc - accel)) <= proto.ACCEL_LSB_G


def test_device_stream_seq_wraps_without_drop():
    cfg = synth.SynthConfig(seed=0)
    stream = synth.DeviceStream(cfg, segments=[(1, 0, 1.0)], rate_multiplier=500.0, encoded=True).start()
    blobs = []
    while True:
        chunk = stream.read(timeout=2.0)
        if not chunk:
            break
        blobs.extend(chunk)
    stream.stop()
    state = proto.DecodeState()
    frames = proto.decode_stream(state, b"".join(blobs))
    assert len(frames) == 500
    assert state.frames_dropped == 0
    assert [f.seq for f in frames[250:260]] == [250, 251, 252, 253, 254, 255, 0, 1, 2, 3]


def test_device_stream_drop_oldest_counted():
    cfg = synth.SynthConfig(seed=0)
    stream = synth.DeviceStream(cfg, segments=[(1, 0, 1.0)], rate_multiplier=1000.0, buffer_frames=64).start()
    stream._thread.join(timeout=10.0)
    assert stream.dropped > 0
    leftover = stream.read(timeout=0.1)
    assert len(leftover) + stream.dropped == stream.produced
    stream.stop()


def test_tcp_stream_decodes():
    cfg = synth.SynthConfig(seed=3)
    srv, _ = synth.serve_tcp(cfg, port=0, segments=[(2, 0, 0.5)], rate_multiplier=100.0)
    try:
        port = srv.getsockname()[1]
        with socket.create_connection(("127.0.0.1", port), timeout=5.0) as conn:
            conn.settimeout(5.0)
            raw = b""
            while True:
                try:
                    chunk = conn.recv(65536)
                except TimeoutError:
                    break
                if not chunk:
                    break
                raw += chunk
        state = proto.DecodeState()
        frames = proto.decode_stream(state, raw)
        assert len(frames) == 250 and state.resyncs == 0
    finally:
        srv.close()


def test_config_json_round_trip(tmp_path):
    cfg = synth.SynthConfig(seed=11, intensity=0.5)
    synth.config_to_json(cfg, tmp_path / "cfg.json")
    back = synth.config_from_json(tmp_path / "cfg.json")
    assert back.seed == 11 and back.intensity == 0.5
    assert np.allclose(back.gain_matrix, cfg.gain_matrix)
    assert back.artifact_gain_per_speed == cfg.artifact_gain_per_speed
