"""Command-line entry points.

    semglab synth generate   write synthetic .dat sessions
    semglab bench run        run the benchmark grid on a synthetic corpus
    semglab bench report     pretty-print a saved result grid
    semglab quality report   SNR / SMR / deformation table
    semglab online simulate  simulated online session
    semglab serve            start the acquisition service
"""

from __future__ import annotations

import json
from pathlib import Path

import click

SPLIT_NAMES = {"sd": "single_day", "cd": "cross_day", "cs": "cross_subject"}


@click.group()
def main():
    """Workbench for gesture-free hand-intention decoding."""


@main.group(name="synth")
def synth_group():
    """Synthetic data generation."""


@synth_group.command("generate")
@click.option("--subjects", default=2, show_default=True)
@click.option("--days", default=2, show_default=True)
@click.option("--blocks", default=12, show_default=True, help="Blocks per session (12 = full paradigm).")
@click.option("--seed", default=0, show_default=True)
@click.option("--shift-day2", default=1, show_default=True, help="Wearing shift applied on day 2.")
@click.option("--intensity", default=1.0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("data"), show_default=True)
def synth_generate(subjects, days, blocks, seed, shift_day2, intensity, out):
    """Write subjects x days synthetic sessions under OUT."""
    from .recording import paradigm_schedule, session_path, write_recording
    from .synth import SynthConfig, synth_session

    cfg = SynthConfig(seed=seed, intensity=intensity)
    schedule = paradigm_schedule(n_blocks=blocks)
    for sid in range(1, subjects + 1):
        for day in range(1, days + 1):
            shift = shift_day2 if day == 2 else 0
            rec = synth_session(cfg, subject_id=sid, day_id=day, wearing_shift=shift, schedule=schedule)
            path = write_recording(rec, session_path(out, sid, day))
            click.echo(f"wrote {path} ({rec.data.shape[0]} rows)")


@main.group()
def bench():
    """Benchmark experiments."""


@bench.command("run")
@click.option("--split", "splits", multiple=True, type=click.Choice(["sd", "cd", "cs"]),
              default=("sd", "cd", "cs"), show_default=True)
@click.option("--classes", "classes_list", multiple=True, type=click.Choice(["6", "12"]),
              default=("6", "12"), show_default=True)
@click.option("--window", "windows", multiple=True, type=click.Choice(["250", "500", "750"]),
              default=("250", "500", "750"), show_default=True)
@click.option("--models", default="lda,naive_bayes,knn,linear_svm,random_forest", show_default=True)
@click.option("--subjects", default=10, show_default=True)
@click.option("--blocks", default=12, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("results"), show_default=True)
def bench_run(splits, classes_list, windows, models, subjects, blocks, seed, out):
    """Build a synthetic corpus and run the experiment matrix."""
    from .harness import CorpusConfig, build_feature_tables, run_benchmark
    from .recording import paradigm_schedule

    corpus = CorpusConfig(subjects=tuple(range(1, subjects + 1)), seed=seed)
    schedule = paradigm_schedule(n_blocks=blocks) if blocks != 12 else None
    windows_ms = tuple(int(w) for w in windows)
    click.echo(f"building corpus: {subjects} subjects x 2 days ...")
    tables = build_feature_tables(corpus, windows_ms=windows_ms, schedule=schedule,
                                  progress=lambda s, d: click.echo(f"  S{s:02d} D{d}", nl=True))
    grid = run_benchmark(
        tables,
        model_kinds=tuple(models.split(",")),
        split_kinds=tuple(SPLIT_NAMES[s] for s in splits),
        windows_ms=windows_ms,
        classes_list=tuple(int(c) for c in classes_list),
        seed=seed,
        progress=lambda m, s, w, k, cell: click.echo(
            f"  {m:14s} {s:13s} {w}ms {k:2d}c: {cell.mean:.4f} ± {cell.std:.4f}"
        ),
    )
    out.mkdir(parents=True, exist_ok=True)
    grid.to_json(out / "grid.json")
    grid.to_csv(out / "grid.csv")
    with open(out / "manifest.json", "w") as fh:
        json.dump(grid.manifest, fh, indent=2)
    click.echo(f"saved {out / 'grid.json'}, {out / 'grid.csv'}")


@bench.command("report")
@click.option("--results", type=click.Path(path_type=Path, exists=True),
              default=Path("results/grid.json"), show_default=True)
def bench_report(results):
    """Print a saved grid as a table."""
    with open(results) as fh:
        payload = json.load(fh)
    cells = payload["cells"]
    windows = sorted({c["window_ms"] for c in cells})
    classes = sorted({c["classes"] for c in cells})
    header = f"{'Method':15s} {'Type':4s}" + "".join(
        f"  {k}c/{w}ms".rjust(14) for k in classes for w in windows
    )
    click.echo(header)
    models_in = sorted({c["model"] for c in cells})
    for model in models_in:
        for typ in ("SD", "CD", "CS"):
            row = [c for c in cells if c["model"] == model and c["type"] == typ]
            if not row:
                continue
            line = f"{model:15s} {typ:4s}"
            for k in classes:
                for w in windows:
                    cell = next((c for c in row if c["classes"] == k and c["window_ms"] == w), None)
                    if cell is None or cell["absent"]:
                        line += "        absent"
                    else:
                        line += f"  {cell['mean']:.3f}±{cell['std']:.3f}"
            click.echo(line)

    types_present = {c["type"] for c in cells if not c["absent"]}
    if {"SD", "CD", "CS"} <= types_present:
        click.echo("\nsplit ordering (grand means):")
        for model in models_in:
            means = {}
            for typ in ("SD", "CD", "CS"):
                vals = [c["mean"] for c in cells if c["model"] == model and c["type"] == typ and not c["absent"]]
                means[typ] = sum(vals) / len(vals) if vals else float("nan")
            ok = means["SD"] >= means["CD"] >= means["CS"]
            click.echo(
                f"  {model:15s} SD {means['SD']:.3f}  CD {means['CD']:.3f}  CS {means['CS']:.3f}"
                f"  {'ok' if ok else 'VIOLATED'}"
            )


@main.group(name="quality")
def quality_group():
    """Signal-quality metrics."""


@quality_group.command("report")
@click.option("--subjects", default=3, show_default=True)
@click.option("--blocks", default=12, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=Path("quality.csv"), show_default=True)
def quality_report_cmd(subjects, blocks, seed, out):
    """SNR / SMR / deformation per force mode on synthetic sessions."""
    from .quality import quality_report
    from .recording import paradigm_schedule
    from .synth import SynthConfig, synth_session

    schedule = paradigm_schedule(n_blocks=blocks)
    recs = [
        synth_session(SynthConfig(seed=seed), subject_id=sid, day_id=1, schedule=schedule)
        for sid in range(1, subjects + 1)
    ]
    report = quality_report(recs)
    report.to_csv(out)
    click.echo(f"{'mode':8s} {'SNR':>12s} {'SMR':>12s} {'Omega':>14s}")
    for row in report.rows:
        click.echo(
            f"mode {row.mode_id:2d}  {row.snr_db_mean:5.1f} ({row.snr_db_std:4.1f})"
            f"  {row.smr_db_mean:5.1f} ({row.smr_db_std:4.1f})"
            f"  {row.omega_db_mean:6.2f} ({row.omega_db_std:4.2f})"
        )
    click.echo(f"saved {out}")


@main.group(name="online")
def online_group():
    """Online decoding experiments."""


@online_group.command("simulate")
@click.option("--trials", default=50, show_default=True)
@click.option("--window", default=250, show_default=True)
@click.option("--step", default=250, show_default=True)
@click.option("--model", default="random_forest", show_default=True)
@click.option("--subject", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
def online_simulate(trials, window, step, model, subject, seed):
    """Train on a synthetic session, then run a cued online session."""
    from . import models as M
    from .features import feature_names
    from .harness import session_feature_arrays
    from .online import SimulatedSubject, run_online_session
    from .synth import SynthConfig, synth_session

    cfg = SynthConfig(seed=seed)
    click.echo("training decoder ...")
    rec = synth_session(cfg, subject_id=subject, day_id=1)
    table = session_feature_arrays(rec, (window,), step)[window]
    mask = table.label <= 6
    trained = M.train(model, table.X[mask], table.label[mask], seed=seed,
                      feature_layout=tuple(feature_names()))
    stream = SimulatedSubject(cfg, seed=seed, subject_id=subject)
    result = run_online_session(stream, trained, window_ms=window, step_ms=step,
                                n_trials=trials, seed=seed)
    for i, t in enumerate(result.trials, 1):
        mark = "ok " if t.correct else ("TO " if t.timed_out else "ERR")
        dt = "      -" if t.delta_t_s is None else f"{t.delta_t_s * 1000:6.0f}ms"
        click.echo(f"trial {i:3d}: cued {t.cued_mode:2d} -> {t.predicted_mode} {mark} dt={dt}")
    click.echo(
        f"accuracy {result.accuracy:.2%} over {result.completed} trials, "
        f"mean dt {0 if result.mean_delta_t_s is None else result.mean_delta_t_s * 1000:.0f} ms, "
        f"max step latency {result.max_step_latency_s * 1000:.1f} ms"
    )


@main.command("serve")
@click.option("--port", default=None, type=int, help="Overrides SEMGLAB_PORT / config file.")
@click.option("--data-dir", type=click.Path(path_type=Path), default=None)
@click.option("--rate-multiplier", default=1.0, show_default=True)
@click.option("--frontend", type=click.Path(path_type=Path, exists=True), default=None,
              help="Serve a built browser app from this directory.")
@click.option("--config", "config_path", type=click.Path(path_type=Path, exists=True), default=None)
def serve_cmd(port, data_dir, rate_multiplier, frontend, config_path):
    """Run the acquisition service (HTTP control + WebSocket stream)."""
    from .service import ServiceConfig, serve

    cfg = ServiceConfig.from_file(config_path) if config_path else ServiceConfig()
    if port is not None:
        cfg.port = port
    if data_dir is not None:
        cfg.data_dir = data_dir
    if frontend is not None:
        cfg.frontend_dir = frontend
    cfg.rate_multiplier = rate_multiplier
    click.echo(f"serving on 127.0.0.1:{cfg.port}, data dir {cfg.data_dir}")
    serve(cfg)


if __name__ == "__main__":
    main()
