"""Command-line entry points.

Subcommands: generate, train-teacher, train-student, sweep, evaluate, drift,
pc-sim, run. All state flows through flags and the manifest; nothing is read
from the environment.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio, harness, pcoding
from .dataio import ExperimentManifest
from .fgl import FglConfig, build_paired_dataset, evaluate_mse, train_student, train_teacher
from .mackey_glass import MgParams, generate, make_windows, split
from .metrics import auc_roc, youden_threshold
from .neural import load_checkpoint, save_checkpoint
from .quantizer import fit_bins


def _add_mg_flags(parser: argparse.ArgumentParser) -> None:
    defaults = MgParams()
    parser.add_argument("--length", type=int, default=defaults.length)
    parser.add_argument("--tau-delay", type=int, default=defaults.tau_delay)
    parser.add_argument("--beta0", type=float, default=defaults.beta0)
    parser.add_argument("--theta", type=float, default=defaults.theta)
    parser.add_argument("--n-exp", type=float, default=defaults.n_exp)
    parser.add_argument("--gamma", type=float, default=defaults.gamma)
    parser.add_argument("--dt", type=float, default=defaults.dt)
    parser.add_argument("--p0", type=float, default=defaults.p0)


def _mg_from_args(args) -> MgParams:
    return MgParams(
        tau_delay=args.tau_delay,
        beta0=args.beta0,
        theta=args.theta,
        n_exp=args.n_exp,
        gamma=args.gamma,
        dt=args.dt,
        p0=args.p0,
        length=args.length,
    )


def _manifest_from_args(args) -> ExperimentManifest:
    if getattr(args, "manifest", None):
        manifest = dataio.read_manifest(args.manifest)
    else:
        manifest = ExperimentManifest()
    updates = {}
    bins = getattr(args, "bins", None)
    if isinstance(bins, (list, tuple)) and bins:
        updates["bins"] = tuple(bins)
    if getattr(args, "horizons", None):
        updates["horizons"] = tuple(args.horizons)
    if getattr(args, "full_horizons", False):
        updates["horizons"] = tuple(range(2, 16))
    if getattr(args, "seeds", None):
        updates["seeds"] = tuple(args.seeds)
    if getattr(args, "alphas", None) is not None:
        updates["alphas"] = tuple(args.alphas)
    if getattr(args, "temperature", None) is not None:
        updates["temperature"] = args.temperature
    if getattr(args, "readout", None):
        updates["readout"] = args.readout
    return dataclasses.replace(manifest, **updates) if updates else manifest


def _prepared(manifest: ExperimentManifest, bins: int):
    trajectory = generate(manifest.mg)
    train_vals, val_vals, test_vals = split(trajectory, manifest.split)
    return train_vals, val_vals, test_vals, fit_bins(train_vals, bins)


def cmd_generate(args) -> int:
    params = _mg_from_args(args)
    trajectory = generate(params)
    dataio.write_trajectory_csv(args.out, trajectory.values, params)
    print(f"wrote {params.length} values to {args.out}")
    return 0


def cmd_train_teacher(args) -> int:
    manifest = _manifest_from_args(args)
    train_vals, val_vals, test_vals, spec = _prepared(manifest, args.bins)
    cfg = manifest.train_config(harness.teacher_seed(args.seed, args.bins))
    teacher, history = train_teacher(
        make_windows(train_vals, manifest.lookback, 1),
        make_windows(val_vals, manifest.lookback, 1),
        spec,
        cfg,
        hidden=manifest.hidden,
        dropout_rate=manifest.dropout_rate,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{harness.teacher_id(args.bins, args.seed)}.ckpt"
    save_checkpoint(teacher, path)
    test_ds = make_windows(test_vals, manifest.lookback, 1)
    test_mse = evaluate_mse(teacher, test_ds.inputs, test_ds.targets, spec, manifest.readout)
    print(f"saved {path} after {len(history)} epochs; test mse {test_mse:.6g}")
    return 0


def cmd_train_student(args) -> int:
    manifest = _manifest_from_args(args)
    train_vals, val_vals, test_vals, spec = _prepared(manifest, args.bins)
    teacher = load_checkpoint(args.teacher) if args.teacher else None
    fgl_cfg = FglConfig(
        alpha=args.alpha, temperature=manifest.temperature, student_horizon=args.horizon
    )
    cfg = manifest.train_config(harness.run_seed(args.seed, args.bins, args.horizon, args.alpha))
    student, history = train_student(
        build_paired_dataset(train_vals, manifest.lookback, args.horizon),
        build_paired_dataset(val_vals, manifest.lookback, args.horizon),
        teacher,
        spec,
        fgl_cfg,
        cfg,
        hidden=manifest.hidden,
        dropout_rate=manifest.dropout_rate,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rid = harness.run_id(args.bins, args.horizon, args.alpha, args.seed)
    save_checkpoint(student, out / f"{rid}.ckpt")
    test_pairs = build_paired_dataset(test_vals, manifest.lookback, args.horizon)
    test_mse = evaluate_mse(
        student, test_pairs.student_windows, test_pairs.targets, spec, manifest.readout
    )
    print(f"saved {out / (rid + '.ckpt')} after {len(history)} epochs; test mse {test_mse:.6g}")
    return 0


def cmd_sweep(args) -> int:
    manifest = _manifest_from_args(args)
    outcome = harness.alpha_sweep(manifest, args.sweep_alphas, args.bins, args.out, args.workers)
    print(f"wrote {len(outcome.results)} rows to {Path(args.out) / 'sweep.csv'}")
    return 1 if outcome.failures else 0


def cmd_evaluate(args) -> int:
    if args.scored_labels:
        data = dataio.load_scored_labels_csv(args.scored_labels)
        auc = auc_roc(data.scores, data.labels)
        point = youden_threshold(data.scores, data.labels)
        lines = [
            "auc_roc,threshold,sensitivity,fpr",
            f"{dataio.fmt(auc)},{dataio.fmt(point.threshold)},"
            f"{dataio.fmt(point.sensitivity)},{dataio.fmt(point.fpr)}",
        ]
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        print(text, end="")
        return 0
    rows = dataio.read_results_csv(args.results)
    summary = harness.summarize(rows)
    out = args.out or "summary.csv"
    dataio.write_summary_csv(out, summary)
    print(f"wrote {len(summary)} summary rows to {out}")
    return 0


def cmd_drift(args) -> int:
    manifest = _manifest_from_args(args)
    if args.delta is not None or args.threshold is not None:
        table = {}
        for bins in manifest.bins:
            if args.delta is not None and args.threshold is not None:
                table[bins] = {"delta": args.delta, "threshold": args.threshold}
            else:
                base = manifest.ph_params(bins)
                table[bins] = {
                    "delta": args.delta if args.delta is not None else base.delta,
                    "threshold": args.threshold
                    if args.threshold is not None
                    else base.threshold,
                }
        manifest = dataclasses.replace(manifest, ph=table)
    cells = harness.run_drift_experiment(manifest, args.base, args.out)
    changes = [100.0 * (c.mse_after - c.mse_before) / c.mse_before for c in cells]
    alarms = sum(c.alarm_count for c in cells)
    print(
        f"{len(cells)} cells, {alarms} alarms, mean mse change "
        f"{np.mean(changes):+.3f}% -> {args.out or args.base}"
    )
    return 0


def cmd_pc_sim(args) -> int:
    model = pcoding.PcModel(
        v_p=args.v_p,
        sigma_p=args.sigma_p,
        sigma_u=args.sigma_u,
        phi=args.phi0,
        g=args.g,
        gain=args.gain,
    )
    trace = pcoding.simulate(model, args.u, args.step, args.iters)
    lines = ["iteration,phi,eps_p,eps_u,free_energy"]
    lines.extend(
        f"{s.iteration},{dataio.fmt(s.phi)},{dataio.fmt(s.eps_p)},"
        f"{dataio.fmt(s.eps_u)},{dataio.fmt(s.free_energy)}"
        for s in trace
    )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(trace)} steps to {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_run(args) -> int:
    manifest = _manifest_from_args(args)
    outcome = harness.run_experiment(manifest, args.out, workers=args.workers)
    print(f"{len(outcome.results)} result rows -> {outcome.out_dir / 'results.csv'}")
    if outcome.failures:
        for failure in outcome.failures:
            print(f"FAILED {failure.cell}: {failure.error}", file=sys.stderr)
        return 1
    return 0


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fgl", description="Future-guided forecasting toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a chaotic trajectory CSV")
    _add_mg_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    def common(p, horizon=False, alpha=False):
        p.add_argument("--manifest", default=None, help="JSON manifest to start from")
        p.add_argument("--bins", type=int, default=25)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--temperature", type=float, default=None)
        p.add_argument("--readout", choices=("argmax", "expectation"), default=None)
        if horizon:
            p.add_argument("--horizon", type=int, default=5)
        if alpha:
            p.add_argument("--alpha", type=float, default=0.5)
        p.add_argument("--out", required=True)

    p = sub.add_parser("train-teacher", help="train the next-step forecaster")
    common(p)
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser("train-student", help="train an n-step student")
    common(p, horizon=True, alpha=True)
    p.add_argument("--teacher", default=None, help="teacher checkpoint (omit for baseline)")
    p.set_defaults(func=cmd_train_student)

    p = sub.add_parser("sweep", help="train students across a list of alphas")
    p.add_argument("--manifest", default=None)
    p.add_argument("--bins", type=int, default=25)
    p.add_argument("--seeds", type=_int_list, default=None)
    p.add_argument("--horizons", type=_int_list, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument(
        "--alphas", dest="sweep_alphas", type=_float_list, default=[0.0, 0.5, 1.0]
    )
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="summarize results or score labeled data")
    p.add_argument("results", nargs="?", default=None, help="results CSV to summarize")
    p.add_argument("--scored-labels", default=None, help="score,label CSV for AUC/Youden")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("drift", help="Page-Hinkley adaptation over trained models")
    p.add_argument("--manifest", default=None)
    p.add_argument("--base", required=True, help="output directory of a previous run")
    p.add_argument("--bins", type=_int_list, default=None)
    p.add_argument("--horizons", type=_int_list, default=None)
    p.add_argument("--seeds", type=_int_list, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("pc-sim", help="predictive-coding node convergence trace")
    p.add_argument("--v-p", type=float, default=1.0)
    p.add_argument("--sigma-p", type=float, default=1.0)
    p.add_argument("--sigma-u", type=float, default=1.0)
    p.add_argument("--u", type=float, default=2.0)
    p.add_argument("--phi0", type=float, default=0.0)
    p.add_argument("--g", choices=("identity", "scalar"), default="identity")
    p.add_argument("--gain", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pc_sim)

    p = sub.add_parser("run", help="full experiment grid from a manifest")
    p.add_argument("--manifest", default=None)
    p.add_argument("--bins", type=_int_list, default=None)
    p.add_argument("--horizons", type=_int_list, default=None)
    p.add_argument("--full-horizons", action="store_true", help="use horizons 2..15")
    p.add_argument("--seeds", type=_int_list, default=None)
    p.add_argument("--alphas", type=_float_list, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--readout", choices=("argmax", "expectation"), default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "evaluate" and not args.results and not args.scored_labels:
        print("evaluate: provide a results CSV or --scored-labels", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
