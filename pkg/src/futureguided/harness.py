"""End-to-end experiment grids: generate, bin, train, evaluate, adapt, summarize.

A single manifest drives the whole grid. Cells are independent given their
derived seeds, so (bins, seed) work units can run in a process pool; results
are merged and written by a single writer in canonical order, which makes the
output byte-identical no matter the pool width.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataio
from .dataio import ExperimentManifest, ResultRow
from .drift import drift_run
from .errors import ConfigError
from .fgl import (
    FglConfig,
    build_paired_dataset,
    evaluate_mse,
    train_student,
    train_teacher,
)
from .mackey_glass import generate, make_windows, split
from .neural import load_checkpoint, save_checkpoint
from .quantizer import READOUTS, fit_bins

BASELINE_ALPHA = 1.0


def run_seed(seed: int, bins: int, horizon: int, alpha: float) -> int:
    """Derived RNG seed for one student run; alpha=1.0 is the baseline."""
    key = [seed, bins, horizon, int(round(alpha * 10_000))]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def teacher_seed(seed: int, bins: int) -> int:
    return int(np.random.SeedSequence([seed, bins, 1]).generate_state(1)[0])


def drift_seed(seed: int, bins: int, horizon: int, alpha: float) -> int:
    key = [seed, bins, horizon, int(round(alpha * 10_000)), 7]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def run_id(bins: int, horizon: int, alpha: float, seed: int) -> str:
    return f"b{bins:02d}-h{horizon:02d}-a{alpha:.2f}-s{seed}"


def teacher_id(bins: int, seed: int) -> str:
    return f"teacher-b{bins:02d}-s{seed}"


@dataclass(frozen=True)
class CellFailure:
    cell: str
    error: str


@dataclass(frozen=True)
class RunOutcome:
    results: list[ResultRow]
    failures: list[CellFailure]
    out_dir: Path


def _prepare_splits(manifest: ExperimentManifest):
    trajectory = generate(manifest.mg)
    return trajectory, split(trajectory, manifest.split)


def _work_unit(
    manifest: ExperimentManifest,
    bins: int,
    seed: int,
    variants: list[tuple[float, bool]],
    horizons: tuple[int, ...],
    checkpoint_dir: str | None,
) -> tuple[list[ResultRow], list[CellFailure]]:
    """Train everything that shares one (bins, seed): the teacher plus all
    (horizon, alpha) students, evaluated on the test split with both readouts."""
    _, (train_vals, val_vals, test_vals) = _prepare_splits(manifest)
    spec = fit_bins(train_vals, bins)
    lookback = manifest.lookback
    rows: list[ResultRow] = []
    failures: list[CellFailure] = []

    teacher = None
    if any(use_teacher for _, use_teacher in variants):
        try:
            teacher, _ = train_teacher(
                make_windows(train_vals, lookback, 1),
                make_windows(val_vals, lookback, 1),
                spec,
                manifest.train_config(teacher_seed(seed, bins)),
                hidden=manifest.hidden,
                dropout_rate=manifest.dropout_rate,
            )
            if checkpoint_dir:
                save_checkpoint(teacher, Path(checkpoint_dir) / f"{teacher_id(bins, seed)}.ckpt")
        except Exception as exc:  # noqa: BLE001 - the grid must keep going
            failures.append(CellFailure(cell=teacher_id(bins, seed), error=repr(exc)))
            failures.extend(
                CellFailure(cell=run_id(bins, h, a, seed), error="teacher failed")
                for h in horizons
                for a, use in variants
                if use
            )
            variants = [(a, use) for a, use in variants if not use]

    for horizon in horizons:
        try:
            train_pairs = build_paired_dataset(train_vals, lookback, horizon)
            val_pairs = build_paired_dataset(val_vals, lookback, horizon)
            test_pairs = build_paired_dataset(test_vals, lookback, horizon)
        except Exception as exc:  # noqa: BLE001
            failures.extend(
                CellFailure(cell=run_id(bins, horizon, a, seed), error=repr(exc))
                for a, _ in variants
            )
            continue
        for alpha, use_teacher in variants:
            rid = run_id(bins, horizon, alpha, seed)
            try:
                student, _ = train_student(
                    train_pairs,
                    val_pairs,
                    teacher if use_teacher else None,
                    spec,
                    FglConfig(
                        alpha=alpha,
                        temperature=manifest.temperature,
                        student_horizon=horizon,
                    ),
                    manifest.train_config(run_seed(seed, bins, horizon, alpha)),
                    hidden=manifest.hidden,
                    dropout_rate=manifest.dropout_rate,
                )
                if checkpoint_dir:
                    save_checkpoint(student, Path(checkpoint_dir) / f"{rid}.ckpt")
                for readout in READOUTS:
                    rows.append(
                        ResultRow(
                            run_id=rid,
                            alpha=alpha,
                            horizon=horizon,
                            bins=bins,
                            seed=seed,
                            readout=readout,
                            split="test",
                            mse=evaluate_mse(
                                student,
                                test_pairs.student_windows,
                                test_pairs.targets,
                                spec,
                                readout,
                            ),
                        )
                    )
            except Exception as exc:  # noqa: BLE001
                failures.append(CellFailure(cell=rid, error=repr(exc)))
    return rows, failures


def _grid_variants(manifest: ExperimentManifest) -> list[tuple[float, bool]]:
    variants: list[tuple[float, bool]] = [(BASELINE_ALPHA, False)]
    for alpha in manifest.alphas:
        if alpha != BASELINE_ALPHA:
            variants.append((alpha, True))
    return variants


def _execute(
    manifest: ExperimentManifest,
    units: list[tuple[int, int]],
    variants: list[tuple[float, bool]],
    horizons: tuple[int, ...],
    checkpoint_dir: str | None,
    workers: int,
) -> tuple[list[ResultRow], list[CellFailure]]:
    rows: list[ResultRow] = []
    failures: list[CellFailure] = []
    if workers <= 1:
        for bins, seed in units:
            unit_rows, unit_failures = _work_unit(
                manifest, bins, seed, variants, horizons, checkpoint_dir
            )
            rows.extend(unit_rows)
            failures.extend(unit_failures)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_work_unit, manifest, bins, seed, variants, horizons, checkpoint_dir)
                for bins, seed in units
            ]
            for future in futures:
                unit_rows, unit_failures = future.result()
                rows.extend(unit_rows)
                failures.extend(unit_failures)
    return rows, failures


def run_experiment(
    manifest: ExperimentManifest, out_dir: Path | str, workers: int = 1
) -> RunOutcome:
    """Full grid: bins x horizons x (baseline + guided alphas) x seeds."""
    if any(h < 2 for h in manifest.horizons):
        raise ConfigError("student horizons must be >= 2")
    out_dir = Path(out_dir)
    checkpoint_dir = out_dir / "checkpoints"
    checkpoint_dir.mkdir(parents=True, exist_ok=True)

    trajectory, _ = _prepare_splits(manifest)
    trajectory_path = out_dir / "trajectory.csv"
    dataio.write_trajectory_csv(trajectory_path, trajectory.values, manifest.mg)

    units = [(bins, seed) for bins in manifest.bins for seed in manifest.seeds]
    rows, failures = _execute(
        manifest, units, _grid_variants(manifest), manifest.horizons, str(checkpoint_dir), workers
    )

    dataio.write_results_csv(out_dir / "results.csv", rows)
    dataio.write_summary_csv(out_dir / "summary.csv", summarize(rows))
    extra = {
        "data_hash": dataio.sha256_of(trajectory_path),
        "bin_specs": {
            str(bins): dataio.binspec_to_dict(
                fit_bins(split(trajectory, manifest.split)[0], bins)
            )
            for bins in manifest.bins
        },
    }
    dataio.write_manifest(out_dir / "manifest.json", manifest, extra)
    if failures:
        lines = ["cell,error"] + [f"{f.cell},{f.error!r}" for f in sorted(failures, key=lambda f: f.cell)]
        (out_dir / "failures.csv").write_text("\n".join(lines) + "\n")
    return RunOutcome(results=rows, failures=failures, out_dir=out_dir)


def alpha_sweep(
    manifest: ExperimentManifest,
    alphas: list[float],
    bins: int,
    out_dir: Path | str,
    workers: int = 1,
) -> RunOutcome:
    """One full student training per (alpha, horizon, seed) at a fixed bin count.

    Alphas equal to 1.0 still run through the guided code path; their rows are
    bit-identical to baseline rows by construction.
    """
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise ConfigError(f"alphas must lie in [0, 1], got {alphas}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    units = [(bins, seed) for seed in manifest.seeds]
    variants = [(alpha, True) for alpha in alphas]
    rows, failures = _execute(manifest, units, variants, manifest.horizons, None, workers)
    dataio.write_results_csv(out_dir / "sweep.csv", rows)
    return RunOutcome(results=rows, failures=failures, out_dir=out_dir)


def summarize(rows: list[ResultRow]) -> list[dataio.SummaryRow]:
    """Per-(bins, alpha, readout, horizon) mean/std over seeds, plus an average
    row over horizons per variant (the table's Avg row)."""
    groups: dict[tuple[int, float, str], dict[int, list[float]]] = {}
    for row in rows:
        if row.split != "test":
            continue
        by_horizon = groups.setdefault((row.bins, row.alpha, row.readout), {})
        by_horizon.setdefault(row.horizon, []).append(row.mse)
    out: list[dataio.SummaryRow] = []
    for (bins, alpha, readout), by_horizon in sorted(groups.items()):
        means = []
        for horizon, values in sorted(by_horizon.items()):
            mean = float(np.mean(values))
            std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
            means.append(mean)
            out.append(
                dataio.SummaryRow(
                    bins=bins,
                    alpha=alpha,
                    readout=readout,
                    horizon=str(horizon),
                    n_seeds=len(values),
                    mean_mse=mean,
                    std_mse=std,
                )
            )
        out.append(
            dataio.SummaryRow(
                bins=bins,
                alpha=alpha,
                readout=readout,
                horizon="avg",
                n_seeds=len(by_horizon),
                mean_mse=float(np.mean(means)),
                std_mse=None,
            )
        )
    return out


@dataclass(frozen=True)
class DriftCell:
    run_id: str
    alpha: float
    horizon: int
    bins: int
    seed: int
    mse_before: float
    mse_after: float
    alarm_count: int


def run_drift_experiment(
    manifest: ExperimentManifest,
    base_dir: Path | str,
    out_dir: Path | str | None = None,
) -> list[DriftCell]:
    """Apply the identical Page-Hinkley protocol to every trained model.

    ``base_dir`` must be the output of ``run_experiment`` (checkpoints are
    loaded from there). Writes adapted results, a per-cell percent-change
    report, and the alarm log.
    """
    base_dir = Path(base_dir)
    out_dir = Path(out_dir) if out_dir is not None else base_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    _, (train_vals, _, test_vals) = _prepare_splits(manifest)

    cells: list[DriftCell] = []
    adapted_rows: list[tuple[ResultRow, bool]] = []
    alarm_rows: list[tuple[str, int, float, float, str]] = []
    variants = [BASELINE_ALPHA] + [a for a in manifest.alphas if a != BASELINE_ALPHA]
    for bins in manifest.bins:
        spec = fit_bins(train_vals, bins)
        ph = manifest.ph_params(bins)
        for horizon in manifest.horizons:
            test_pairs = build_paired_dataset(test_vals, manifest.lookback, horizon)
            for alpha in variants:
                for seed in manifest.seeds:
                    rid = run_id(bins, horizon, alpha, seed)
                    model = load_checkpoint(base_dir / "checkpoints" / f"{rid}.ckpt")
                    result = drift_run(
                        model,
                        test_pairs.student_windows,
                        test_pairs.targets,
                        spec,
                        ph,
                        manifest.train_config(run_seed(seed, bins, horizon, alpha)),
                        readout=manifest.readout,
                        seed=drift_seed(seed, bins, horizon, alpha),
                    )
                    cells.append(
                        DriftCell(
                            run_id=rid,
                            alpha=alpha,
                            horizon=horizon,
                            bins=bins,
                            seed=seed,
                            mse_before=result.mse_before,
                            mse_after=result.mse_after,
                            alarm_count=len(result.alarms),
                        )
                    )
                    for adapted in (False, True):
                        adapted_rows.append(
                            (
                                ResultRow(
                                    run_id=rid,
                                    alpha=alpha,
                                    horizon=horizon,
                                    bins=bins,
                                    seed=seed,
                                    readout=manifest.readout,
                                    split="test",
                                    mse=result.mse_after if adapted else result.mse_before,
                                ),
                                adapted,
                            )
                        )
                    alarm_rows.extend(
                        (rid, a.stream_index, a.s, a.s_min, a.action) for a in result.alarms
                    )

    dataio.write_adapted_results_csv(out_dir / "adapted_results.csv", adapted_rows)
    dataio.write_drift_report_csv(out_dir / "drift_report.csv", cells)
    dataio.write_alarm_log_csv(out_dir / "alarms.csv", alarm_rows)
    return cells
