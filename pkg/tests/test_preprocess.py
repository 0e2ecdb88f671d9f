import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semglab import preprocess as pp
from semglab.errors import ArgumentError, EmptySplitError, FilterDesignError

FS = 500


def fft_amplitude(x, f, fs=FS):
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(len(x), 1 / fs)
    return np.abs(spec[np.argmin(np.abs(freqs - f))])


# ---------------------------------------------------------------- segmentation

def test_segment_count_examples():
    x = np.zeros((8, 4000))
    assert len(pp.segment_windows(x, 250, 250)) == 32  # floor((4000-125)/125)+1
    assert len(pp.segment_windows(x, 500, 250)) == 31
    assert pp.segment_windows(np.zeros((8, 100)), 250, 250) == []


def test_segment_count_formula_random_triples():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(10, 5000))
        w = int(rng.integers(1, 600))
        step = int(rng.integers(1, 400))
        x = np.zeros((8, n))
        got = pp.segment_windows(x, w * 1000 / FS, step * 1000 / FS)
        expect = 0 if n < w else (n - w) // step + 1
        assert len(got) == expect
        if got:
            assert all(win.shape == (8, w) for win in got)


def test_segment_errors():
    with pytest.raises(ArgumentError):
        pp.segment_windows(np.zeros((8, 100)), 250, 0)
    with pytest.raises(ArgumentError):
        pp.segment_windows(np.zeros((8, 100)), -10, 100)


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(300, 2000),
    w_samp=st.integers(10, 120),
    step_samp=st.integers(5, 100),
)
def test_segment_translation_consistency(n, w_samp, step_samp):
    rng = np.random.default_rng(n)
    x = rng.standard_normal((2, n))
    w_ms, step_ms = w_samp * 1000 / FS, step_samp * 1000 / FS
    full = pp.segment_windows(x, w_ms, step_ms)
    shifted = pp.segment_windows(x[:, step_samp:], w_ms, step_ms)
    for a, b in zip(full[1:], shifted):
        assert np.array_equal(a, b)


# -------------------------------------------------------------------- filtering

KINDS = [("lowpass", (30,)), ("highpass", (20,)), ("bandpass", (20, 150)), ("notch", (50,))]


@pytest.mark.parametrize("kind,cuts", KINDS)
def test_zero_phase_time_reversal(kind, cuts):
    rng = np.random.default_rng(7)
    x = rng.standard_normal(2500)
    y = pp.filter_zero_phase(x, kind, cuts)
    y_rev = pp.filter_zero_phase(x[::-1], kind, cuts)[::-1]
    assert np.max(np.abs(y - y_rev)) / np.max(np.abs(y)) <= 1e-9


def test_constant_through_lowpass():
    c = np.full(1200, 3.25)
    y = pp.filter_zero_phase(c, "lowpass", (30,))
    body = y[8:-8]  # exclude 2x order edge samples
    assert np.max(np.abs(body - 3.25)) / 3.25 <= 1e-6


def test_bandpass_attenuation_oracle():
    t = np.arange(20000) / FS
    x = np.sin(2 * np.pi * 5 * t) + np.sin(2 * np.pi * 100 * t)
    y = pp.filter_zero_phase(x, "bandpass", (20, 150))
    trim = 3000
    att5 = 20 * np.log10(fft_amplitude(x[trim:-trim], 5) / fft_amplitude(y[trim:-trim], 5))
    att100 = 20 * np.log10(fft_amplitude(x[trim:-trim], 100) / fft_amplitude(y[trim:-trim], 100))
    assert att5 >= 20.0
    assert abs(att100) <= 1.0


def test_notch_attenuation_oracle():
    t = np.arange(20000) / FS
    x = np.sin(2 * np.pi * 50 * t)
    y = pp.filter_zero_phase(x, "notch", (50,))
    trim = 3000
    att = 20 * np.log10(fft_amplitude(x[trim:-trim], 50) / fft_amplitude(y[trim:-trim], 50))
    assert att >= 30.0


def test_filter_design_errors():
    x = np.zeros(500)
    with pytest.raises(FilterDesignError):
        pp.filter_zero_phase(x, "lowpass", (260,))
    with pytest.raises(FilterDesignError):
        pp.filter_zero_phase(x, "bandpass", (150, 20))
    with pytest.raises(ArgumentError):
        pp.filter_zero_phase(x, "median", (10,))
    with pytest.raises(ArgumentError):
        pp.filter_zero_phase(np.zeros(10), "lowpass", (30,))


# ------------------------------------------------------------ baseline correction

def test_baseline_constant_offset_removed():
    x = np.zeros((8, 2000)) + 12.5
    y = pp.baseline_correct(x, 1000)
    assert np.max(np.abs(y)) == 0.0


def test_baseline_mean_zero_and_idempotent():
    rng = np.random.default_rng(3)
    x = rng.normal(5.0, 2.0, (8, 3000))
    y = pp.baseline_correct(x, 800)
    assert np.max(np.abs(y[:, :800].mean(axis=1))) <= 1e-9
    y2 = pp.baseline_correct(y, 800)
    assert np.allclose(y, y2, atol=1e-12)

    centered = x - x[:, :800].mean(axis=1, keepdims=True)
    assert np.allclose(pp.baseline_correct(centered, 800), centered)


def test_baseline_errors():
    with pytest.raises(ArgumentError):
        pp.baseline_correct(np.zeros((8, 100)), 0)
    with pytest.raises(ArgumentError):
        pp.baseline_correct(np.zeros((8, 100)), 101)


# ------------------------------------------------------------------------ splits

def fake_window(subject, day, block, label, t_start):
    return pp.Window(
        samples=np.empty((8, 1)),
        label=label,
        block=block,
        speed=0,
        subject_id=subject,
        day_id=day,
        t_start_ms=t_start,
    )


def synthetic_dataset(subjects=(1, 2, 3), days=(1, 2), per_trial=32, classes=6):
    ws = []
    for s in subjects:
        for d in days:
            for block in range(1, 13):
                for label in range(1, classes + 1):
                    for i in range(per_trial):
                        ws.append(fake_window(s, d, block, label, i * 250.0))
    return ws


def test_single_day_counts():
    ds = synthetic_dataset(subjects=(1,), days=(1,))
    train, test = pp.make_split(ds, pp.SplitSpec(kind="single_day", subject_id=1, day_id=1))
    assert len(train) == 8 * 6 * 32 == 1536
    assert len(test) == 4 * 6 * 32 == 768
    assert max(w.block for w in train) < min(w.block for w in test)


def test_cross_day_and_cross_subject():
    ds = synthetic_dataset()
    train, test = pp.make_split(ds, pp.SplitSpec(kind="cross_day", subject_id=2))
    assert {w.day_id for w in train} == {1} and {w.day_id for w in test} == {2}
    assert {w.subject_id for w in train} == {2} == {w.subject_id for w in test}

    train, test = pp.make_split(ds, pp.SplitSpec(kind="cross_subject", subject_id=3))
    assert {w.subject_id for w in test} == {3}
    assert {w.subject_id for w in train} == {1, 2}


def test_split_disjoint_and_sorted():
    ds = synthetic_dataset(subjects=(1, 2), days=(1, 2), per_trial=4)
    for spec in [
        pp.SplitSpec(kind="single_day", subject_id=1, day_id=1),
        pp.SplitSpec(kind="cross_day", subject_id=1),
        pp.SplitSpec(kind="cross_subject", subject_id=2),
    ]:
        train, test = pp.make_split(ds, spec)
        assert not ({id(w) for w in train} & {id(w) for w in test})
        keys = [w.sort_key() for w in train]
        assert keys == sorted(keys)


def test_empty_split_error():
    ds = synthetic_dataset(subjects=(1,), days=(1,))
    with pytest.raises(EmptySplitError):
        pp.make_split(ds, pp.SplitSpec(kind="single_day", subject_id=9, day_id=1))
    with pytest.raises(EmptySplitError):
        pp.make_split([], pp.SplitSpec(kind="single_day", subject_id=1, day_id=1))


def test_windows_from_recording_chain():
    from semglab.recording import paradigm_schedule
    from semglab.synth import SynthConfig, synth_session

    sched = paradigm_schedule(n_blocks=1, n_trials=8)
    rec = synth_session(SynthConfig(seed=4), subject_id=3, day_id=1, schedule=sched)
    windows = pp.windows_from_recording(rec, window_ms=500, step_ms=250)
    # 8 trials x floor((4000-250)/125)+1 sliding windows
    assert len(windows) == 8 * 31
    w = windows[0]
    assert w.samples.shape == (8, 250)
    assert w.subject_id == 3 and w.day_id == 1 and w.block == 1
    assert sorted({x.label for x in windows}) == list(range(1, 9))
    six = pp.windows_from_recording(rec, window_ms=500, step_ms=250, classes=6)
    assert sorted({x.label for x in six}) == list(range(1, 7))


def test_split_manifest_is_json_exportable():
    import json

    ds = synthetic_dataset(subjects=(1,), days=(1,), per_trial=2)
    spec = pp.SplitSpec(kind="single_day", subject_id=1, day_id=1)
    train, test = pp.make_split(ds, spec)
    manifest = pp.split_manifest(spec, train, test)
    text = json.dumps(manifest)  # must round-trip through JSON
    back = json.loads(text)
    assert back["kind"] == "single_day"
    assert back["train"]["count"] == len(train)
    assert back["test"]["count"] == len(test)
    assert back["test"]["windows"][0]["block"] >= 9
