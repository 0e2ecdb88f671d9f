"""Benchmark harness: synthetic corpus building, the experiment grid
(models x splits x window sizes x class counts), per-speed breakdown, and the
force-intensity sweep."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _stats

from . import models as M
from .errors import EmptySplitError
from .features import feature_names, features_batch
from .preprocess import SplitSpec, bandpass_notch, make_split, segment_windows
from .recording import COL_EMG, Recording, extract_trials
from .synth import SynthConfig, synth_session, with_intensity

WINDOWS_MS = (250, 500, 750)
STEP_MS = 250
SPLIT_KINDS = ("single_day", "cross_day", "cross_subject")
SPLIT_ABBREV = {"single_day": "SD", "cross_day": "CD", "cross_subject": "CS"}


@dataclass(frozen=True)
class CorpusConfig:
    subjects: tuple[int, ...] = tuple(range(1, 11))
    days: tuple[int, ...] = (1, 2)
    wearing_shift_by_day: tuple[tuple[int, int], ...] = ((1, 0), (2, 1))
    seed: int = 0
    intensity: float = 1.0

    def shift_for(self, day: int) -> int:
        return dict(self.wearing_shift_by_day)[day]

    def synth_config(self) -> SynthConfig:
        return SynthConfig(seed=self.seed, intensity=self.intensity)


@dataclass(frozen=True)
class FeatRow:
    """Lightweight window record; feature values live in the table's X."""

    index: int
    label: int
    block: int
    speed: int
    subject_id: int
    day_id: int
    t_start_ms: float

    def sort_key(self):
        return (self.subject_id, self.day_id, self.block, self.t_start_ms, self.label)


@dataclass
class FeatureTable:
    window_ms: float
    step_ms: float
    X: np.ndarray
    label: np.ndarray
    block: np.ndarray
    speed: np.ndarray
    subject: np.ndarray
    day: np.ndarray
    t_start_ms: np.ndarray

    def rows(self, max_label: int = 12) -> list[FeatRow]:
        keep = np.flatnonzero(self.label <= max_label)
        return [
            FeatRow(
                index=int(i),
                label=int(self.label[i]),
                block=int(self.block[i]),
                speed=int(self.speed[i]),
                subject_id=int(self.subject[i]),
                day_id=int(self.day[i]),
                t_start_ms=float(self.t_start_ms[i]),
            )
            for i in keep
        ]

    @property
    def n(self) -> int:
        return self.X.shape[0]


def session_feature_arrays(rec: Recording, windows_ms=WINDOWS_MS, step_ms=STEP_MS):
    """Filter one recording, then segment and featurise at every window size."""
    fs = rec.fs
    emg = bandpass_notch(rec.data[:, COL_EMG].T.astype(float), fs=fs)
    trials, _ = extract_trials(rec)
    sid = int(rec.meta.get("subject_id", 0))
    day = int(rec.meta.get("day_id", 0))
    out = {}
    for win_ms in windows_ms:
        stacks, meta = [], []
        for t in trials:
            base = emg[:, t.baseline_slice]
            active = emg[:, t.active_slice]
            if base.shape[1]:
                active = active - base.mean(axis=1, keepdims=True)
            wins = segment_windows(active, win_ms, step_ms, fs=fs)
            if not wins:
                continue
            stacks.append(np.stack(wins))
            step = int(round(step_ms * fs / 1000.0))
            t0_ms = t.active_slice.start / fs * 1000.0
            for i in range(len(wins)):
                meta.append((t.trial_id, t.block, t.speed, sid, day, t0_ms + i * step / fs * 1000.0))
        X = features_batch(np.concatenate(stacks), fs=fs)
        meta = np.array(meta)
        out[win_ms] = FeatureTable(
            window_ms=win_ms,
            step_ms=step_ms,
            X=X,
            label=meta[:, 0].astype(int),
            block=meta[:, 1].astype(int),
            speed=meta[:, 2].astype(int),
            subject=meta[:, 3].astype(int),
            day=meta[:, 4].astype(int),
            t_start_ms=meta[:, 5],
        )
    return out


def _concat_tables(parts: list[FeatureTable]) -> FeatureTable:
    return FeatureTable(
        window_ms=parts[0].window_ms,
        step_ms=parts[0].step_ms,
        X=np.concatenate([p.X for p in parts]),
        label=np.concatenate([p.label for p in parts]),
        block=np.concatenate([p.block for p in parts]),
        speed=np.concatenate([p.speed for p in parts]),
        subject=np.concatenate([p.subject for p in parts]),
        day=np.concatenate([p.day for p in parts]),
        t_start_ms=np.concatenate([p.t_start_ms for p in parts]),
    )


def build_feature_tables(corpus: CorpusConfig, windows_ms=WINDOWS_MS, step_ms=STEP_MS,
                         schedule=None, progress=None) -> dict[int, FeatureTable]:
    """Generate the synthetic corpus and featurise it at every window size."""
    cfg = corpus.synth_config()
    parts: dict[int, list[FeatureTable]] = {w: [] for w in windows_ms}
    for sid in corpus.subjects:
        for day in corpus.days:
            rec = synth_session(cfg, subject_id=sid, day_id=day,
                                wearing_shift=corpus.shift_for(day), schedule=schedule)
            per_window = session_feature_arrays(rec, windows_ms, step_ms)
            for w in windows_ms:
                parts[w].append(per_window[w])
            if progress:
                progress(sid, day)
    return {w: _concat_tables(parts[w]) for w in windows_ms}


@dataclass
class Cell:
    model: str
    split: str
    window_ms: float
    classes: int
    fold_accuracy: dict = field(default_factory=dict)  # fold key -> accuracy
    fold_detail: dict = field(default_factory=dict)  # fold key -> (speeds, correct)
    absent: bool = False

    @property
    def accuracies(self) -> np.ndarray:
        return np.array(list(self.fold_accuracy.values()), dtype=float)

    @property
    def mean(self) -> float:
        return float(self.accuracies.mean()) if self.fold_accuracy else float("nan")

    @property
    def std(self) -> float:
        return float(self.accuracies.std()) if self.fold_accuracy else float("nan")


@dataclass
class ResultGrid:
    cells: dict  # (model, split, window_ms, classes) -> Cell
    manifest: dict

    def cell(self, model, split, window_ms, classes) -> Cell:
        return self.cells[(model, split, window_ms, classes)]

    def to_json(self, path) -> None:
        payload = {"manifest": self.manifest, "cells": []}
        for (model, split, win, k), cell in sorted(self.cells.items()):
            payload["cells"].append(
                {
                    "model": model,
                    "type": SPLIT_ABBREV[split],
                    "classes": k,
                    "window_ms": win,
                    "mean": None if cell.absent else cell.mean,
                    "std": None if cell.absent else cell.std,
                    "folds": {str(f): a for f, a in cell.fold_accuracy.items()},
                    "absent": cell.absent,
                }
            )
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")

    def to_csv(self, path) -> None:
        windows = sorted({k[2] for k in self.cells})
        classes = sorted({k[3] for k in self.cells})
        kinds = sorted({k[0] for k in self.cells})
        splits = [s for s in SPLIT_KINDS if any(k[1] == s for k in self.cells)]
        header = ["Method", "Type"] + [f"{k}-classes {w}ms" for k in classes for w in windows]
        lines = [",".join(header)]
        for model in kinds:
            for split in splits:
                row = [model, SPLIT_ABBREV[split]]
                for k in classes:
                    for w in windows:
                        cell = self.cells.get((model, split, w, k))
                        if cell is None or cell.absent:
                            row.append("absent")
                        else:
                            row.append(f"{cell.mean:.4f} ± {cell.std:.4f}")
                lines.append(",".join(row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _fold_specs(split: str, subjects, days) -> list[tuple]:
    if split == "single_day":
        return [(sid, SplitSpec(kind="single_day", subject_id=sid, day_id=1)) for sid in subjects]
    if split == "cross_day":
        return [(sid, SplitSpec(kind="cross_day", subject_id=sid)) for sid in subjects]
    if split == "cross_subject":
        return [(sid, SplitSpec(kind="cross_subject", subject_id=sid, days=(1,))) for sid in subjects]
    raise ValueError(f"unknown split {split!r}")


def _run_seed(base_seed: int, model: str, split: str, window: float, classes: int, fold) -> int:
    import zlib

    key = f"{base_seed}|{model}|{split}|{window}|{classes}|{fold}"
    return zlib.crc32(key.encode())


def run_benchmark(tables: dict[int, FeatureTable], model_kinds=M.MODEL_KINDS,
                  split_kinds=SPLIT_KINDS, windows_ms=WINDOWS_MS, classes_list=(6, 12),
                  seed=0, progress=None) -> ResultGrid:
    """The full experiment matrix; deterministic under fixed seeds.

    ``seed`` may be a single value or a sequence of replicate seeds; cells
    then aggregate over subjects x seeds.  Missing split data is reported as
    an absent cell and the run continues.
    """
    seeds = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    subjects = sorted(set(int(s) for s in next(iter(tables.values())).subject))
    days = sorted(set(int(d) for d in next(iter(tables.values())).day))
    cells = {}
    t_start = time.time()
    for win in windows_ms:
        table = tables[win]
        for classes in classes_list:
            rows = table.rows(max_label=classes)
            for split in split_kinds:
                fold_data = {}
                for fold_key, spec in _fold_specs(split, subjects, days):
                    try:
                        train_rows, test_rows = make_split(rows, spec)
                    except EmptySplitError:
                        continue
                    tr_idx = np.array([r.index for r in train_rows])
                    te_idx = np.array([r.index for r in test_rows])
                    fold_data[fold_key] = (tr_idx, te_idx)
                for model in model_kinds:
                    cell = Cell(model=model, split=split, window_ms=win, classes=classes)
                    for fold_key, (tr_idx, te_idx) in fold_data.items():
                        for rep in seeds:
                            run_seed = _run_seed(rep, model, split, win, classes, fold_key)
                            trained = M.train(model, table.X[tr_idx], table.label[tr_idx],
                                              seed=run_seed, feature_layout=tuple(feature_names()))
                            pred = M.predict(trained, table.X[te_idx])
                            correct = pred == table.label[te_idx]
                            key = fold_key if len(seeds) == 1 else (fold_key, rep)
                            cell.fold_accuracy[key] = float(np.mean(correct))
                            cell.fold_detail[key] = (table.speed[te_idx].copy(), correct)
                    cell.absent = not cell.fold_accuracy
                    cells[(model, split, win, classes)] = cell
                    if progress:
                        progress(model, split, win, classes, cells[(model, split, win, classes)])
    manifest = {
        "seeds": list(seeds),
        "subjects": subjects,
        "days": days,
        "windows_ms": list(windows_ms),
        "classes": list(classes_list),
        "models": list(model_kinds),
        "splits": list(split_kinds),
        "elapsed_s": round(time.time() - t_start, 3),
    }
    return ResultGrid(cells=cells, manifest=manifest)


# ------------------------------------------------------------------ summaries

def ordering_summary(grid: ResultGrid) -> dict:
    """Grand-mean accuracy per (model, split); the SD >= CD >= CS check."""
    out = {}
    models_in_grid = sorted({k[0] for k in grid.cells})
    for model in models_in_grid:
        per_split = {}
        for split in SPLIT_KINDS:
            accs = [
                c.mean
                for (m, s, w, k), c in grid.cells.items()
                if m == model and s == split and not c.absent
            ]
            per_split[split] = float(np.mean(accs)) if accs else float("nan")
        out[model] = {
            **per_split,
            "ordering_ok": per_split["single_day"] >= per_split["cross_day"] >= per_split["cross_subject"],
        }
    return out


def window_monotonicity_summary(grid: ResultGrid, low=250, high=750) -> dict:
    """Per model: is mean accuracy at 750 ms >= 250 ms within one pooled std?"""
    out = {}
    models_in_grid = sorted({k[0] for k in grid.cells})
    for model in models_in_grid:
        lo_accs, hi_accs = [], []
        for (m, s, w, k), c in grid.cells.items():
            if m != model or c.absent:
                continue
            if w == low:
                lo_accs.append(c.accuracies)
            elif w == high:
                hi_accs.append(c.accuracies)
        lo = np.concatenate(lo_accs)
        hi = np.concatenate(hi_accs)
        pooled_std = float(np.sqrt((lo.var() + hi.var()) / 2.0))
        out[model] = {
            "mean_250": float(lo.mean()),
            "mean_750": float(hi.mean()),
            "pooled_std": pooled_std,
            "ok": float(hi.mean()) >= float(lo.mean()) - pooled_std,
        }
    return out


@dataclass
class SpeedBreakdown:
    per_speed: dict  # speed -> (mean, std) over folds; 'mixed' for all
    pooled_std: float
    max_gap: float

    @property
    def flat_within(self) -> float:
        return self.max_gap / self.pooled_std if self.pooled_std > 0 else 0.0


def breakdown_by_speed(cell: Cell) -> SpeedBreakdown:
    """Recompute one cell's accuracy per treadmill speed (plus 'mixed')."""
    speeds = sorted({int(v) for sp, _ in cell.fold_detail.values() for v in np.unique(sp)})
    per_speed = {}
    fold_means = {s: [] for s in speeds}
    for sp, correct in cell.fold_detail.values():
        for s in speeds:
            mask = sp == s
            if mask.any():
                fold_means[s].append(float(correct[mask].mean()))
    for s in speeds:
        vals = np.array(fold_means[s])
        per_speed[s] = (float(vals.mean()), float(vals.std()))
    mixed = np.array([float(c.mean()) for _, c in cell.fold_detail.values()])
    per_speed["mixed"] = (float(mixed.mean()), float(mixed.std()))
    stds = np.array([per_speed[s][1] for s in speeds])
    means = np.array([per_speed[s][0] for s in speeds])
    pooled = float(np.sqrt(np.mean(stds**2)))
    gap = float(means.max() - means.min())
    return SpeedBreakdown(per_speed=per_speed, pooled_std=pooled, max_gap=gap)


@dataclass
class IntensityResult:
    levels: tuple
    mean_accuracy: np.ndarray
    per_subject: dict  # subject -> accuracy array over levels
    poly_coefficients: np.ndarray  # 5th-order fit, highest power first
    spearman_rho: float
    second_differences: np.ndarray


def sweep_intensity(levels=(0.0, 0.2, 0.4, 0.6, 0.8, 1.0), subjects=(1, 2, 3),
                    seed: int = 0, window_ms: float = 500, step_ms: float = STEP_MS,
                    model_kind: str = "random_forest", classes: int = 6,
                    schedule=None) -> IntensityResult:
    """Train at full intensity, test per intensity bin (blocks 9-12)."""
    per_subject = {}
    for sid in subjects:
        base_cfg = SynthConfig(seed=seed, intensity=1.0)
        train_rec = synth_session(base_cfg, subject_id=sid, day_id=1, schedule=schedule)
        table = session_feature_arrays(train_rec, (window_ms,), step_ms)[window_ms]
        train_mask = (table.block <= 8) & (table.label <= classes)
        trained = M.train(model_kind, table.X[train_mask], table.label[train_mask],
                          seed=_run_seed(seed, model_kind, "intensity", window_ms, classes, sid))
        accs = []
        for level in levels:
            cfg = with_intensity(base_cfg, level)
            test_rec = synth_session(cfg, subject_id=sid, day_id=1, schedule=schedule)
            tt = session_feature_arrays(test_rec, (window_ms,), step_ms)[window_ms]
            mask = (tt.block >= 9) & (tt.label <= classes)
            pred = M.predict(trained, tt.X[mask])
            accs.append(float(np.mean(pred == tt.label[mask])))
        per_subject[sid] = np.array(accs)
    mean_acc = np.mean(np.vstack(list(per_subject.values())), axis=0)
    rho = float(_stats.spearmanr(np.asarray(levels), mean_acc).statistic)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", np.exceptions.RankWarning)
        coeffs = np.polyfit(np.asarray(levels), mean_acc, min(5, len(levels) - 1))
    return IntensityResult(
        levels=tuple(levels),
        mean_accuracy=mean_acc,
        per_subject=per_subject,
        poly_coefficients=coeffs,
        spearman_rho=rho,
        second_differences=np.diff(mean_acc, 2),
    )
