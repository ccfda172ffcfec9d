"""Readers and writers for the toolkit's file formats.

Everything human-facing is CSV or JSON with locale-independent decimal
points; writers are deterministic (canonical ordering, fixed float format) so
re-runs can be compared byte for byte. Readers reject malformed input with
the offending line number instead of coercing silently.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .drift import PhParams
from .errors import ConfigError, ParseError
from .fgl import TrainConfig
from .mackey_glass import MgParams, SplitSpec
from .metrics import ScoredLabels
from .quantizer import BinSpec

TOOLKIT_VERSION = "0.1.0"

# Default detector sensitivity per bin count; override to match the scale of
# the error stream being monitored (these assume errors measured in bins).
DEFAULT_PH = {
    25: {"delta": 0.130, "threshold": 0.647},
    50: {"delta": 5.78, "threshold": 7.84},
}


def fmt(value: float) -> str:
    """Fixed 6-significant-digit decimal formatting."""
    return format(float(value), ".6g")


def sha256_of(path: Path | str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Trajectory CSV + parameter sidecar


def write_trajectory_csv(path: Path | str, values: np.ndarray, params: MgParams) -> None:
    path = Path(path)
    lines = ["value"]
    lines.extend(repr(float(v)) for v in values)
    path.write_text("\n".join(lines) + "\n")
    sidecar = path.with_suffix(path.suffix + ".params.txt")
    sidecar.write_text(
        "".join(
            f"{field.name} = {getattr(params, field.name)!r}\n"
            for field in dataclasses.fields(params)
        )
    )


def read_trajectory_csv(path: Path | str) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    if lines[0].strip() != "value":
        raise ParseError(f"{path}: line 1: expected header 'value', got {lines[0]!r}")
    try:
        return np.array([float(line) for line in lines[1:] if line.strip()])
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric value ({exc})") from exc


# ---------------------------------------------------------------------------
# Windowed datasets with integer labels (externally preprocessed event data)


@dataclass(frozen=True)
class LabeledWindows:
    inputs: np.ndarray  # (n, lookback)
    labels: np.ndarray  # (n,) integer classes

    def __len__(self) -> int:
        return len(self.labels)


def load_windowed_csv(path: Path | str) -> LabeledWindows:
    """Load rows of ``f0,...,f{L-1},label`` with a strict header."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = [cell.strip() for cell in lines[0].split(",")]
    width = len(header) - 1
    expected = [f"f{i}" for i in range(width)] + ["label"]
    if width < 1 or header != expected:
        raise ParseError(f"{path}: line 1: expected header f0,...,f{{L-1}},label")
    rows, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != width + 1:
            raise ParseError(
                f"{path}: line {lineno}: expected {width + 1} cells, got {len(cells)}"
            )
        try:
            values = [float(cell) for cell in cells]
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric cell") from None
        if not float(values[-1]).is_integer():
            raise ParseError(f"{path}: line {lineno}: label must be an integer")
        rows.append(values[:-1])
        labels.append(int(values[-1]))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return LabeledWindows(inputs=np.array(rows), labels=np.array(labels, dtype=np.int64))


def load_scored_labels_csv(path: Path | str) -> ScoredLabels:
    """Load ``score,label`` rows with binary labels."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    if [cell.strip() for cell in lines[0].split(",")] != ["score", "label"]:
        raise ParseError(f"{path}: line 1: expected header 'score,label'")
    scores, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise ParseError(f"{path}: line {lineno}: expected 2 cells")
        try:
            score = float(cells[0])
            label = int(cells[1])
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric cell") from None
        if label not in (0, 1):
            raise ParseError(f"{path}: line {lineno}: label must be 0 or 1")
        scores.append(score)
        labels.append(label)
    if not scores:
        raise ParseError(f"{path}: no data rows")
    return ScoredLabels(scores=np.array(scores), labels=np.array(labels, dtype=np.int64))


# ---------------------------------------------------------------------------
# Results CSV


RESULTS_HEADER = ["run_id", "alpha", "horizon", "bins", "seed", "readout", "split", "mse"]


@dataclass(frozen=True)
class ResultRow:
    run_id: str
    alpha: float
    horizon: int
    bins: int
    seed: int
    readout: str
    split: str
    mse: float


def result_sort_key(row: ResultRow):
    return (row.run_id, row.horizon, row.seed, row.readout, row.split)


def format_result_row(row: ResultRow) -> str:
    return ",".join(
        [
            row.run_id,
            fmt(row.alpha),
            str(row.horizon),
            str(row.bins),
            str(row.seed),
            row.readout,
            row.split,
            fmt(row.mse),
        ]
    )


def write_results_csv(path: Path | str, rows: list[ResultRow]) -> None:
    lines = [",".join(RESULTS_HEADER)]
    lines.extend(format_result_row(row) for row in sorted(rows, key=result_sort_key))
    Path(path).write_text("\n".join(lines) + "\n")


def read_results_csv(path: Path | str) -> list[ResultRow]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split(",") != RESULTS_HEADER:
        raise ParseError(f"{path}: line 1: expected results header")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(RESULTS_HEADER):
            raise ParseError(f"{path}: line {lineno}: expected {len(RESULTS_HEADER)} cells")
        try:
            rows.append(
                ResultRow(
                    run_id=cells[0],
                    alpha=float(cells[1]),
                    horizon=int(cells[2]),
                    bins=int(cells[3]),
                    seed=int(cells[4]),
                    readout=cells[5],
                    split=cells[6],
                    mse=float(cells[7]),
                )
            )
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: malformed row") from None
    return rows


# ---------------------------------------------------------------------------
# Summary, drift, and alarm CSVs


@dataclass(frozen=True)
class SummaryRow:
    bins: int
    alpha: float
    readout: str
    horizon: str  # horizon number, or "avg" for the per-variant average row
    n_seeds: int
    mean_mse: float
    std_mse: float | None


def write_summary_csv(path: Path | str, rows: list[SummaryRow]) -> None:
    lines = ["bins,alpha,readout,horizon,n_seeds,mean_mse,std_mse"]
    for row in rows:
        std = "" if row.std_mse is None else fmt(row.std_mse)
        lines.append(
            f"{row.bins},{fmt(row.alpha)},{row.readout},{row.horizon},"
            f"{row.n_seeds},{fmt(row.mean_mse)},{std}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_adapted_results_csv(
    path: Path | str, rows: list[tuple[ResultRow, bool]]
) -> None:
    """Results schema plus an ``adapted`` flag (0 = static, 1 = after retraining)."""
    lines = [",".join(RESULTS_HEADER + ["adapted"])]
    for row, adapted in sorted(rows, key=lambda pair: (result_sort_key(pair[0]), pair[1])):
        lines.append(
            ",".join(
                [
                    row.run_id,
                    fmt(row.alpha),
                    str(row.horizon),
                    str(row.bins),
                    str(row.seed),
                    row.readout,
                    row.split,
                    fmt(row.mse),
                    str(int(adapted)),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_drift_report_csv(path: Path | str, cells) -> None:
    """Per-cell adaptation report: one row per (variant, horizon, seed)."""
    lines = ["run_id,alpha,horizon,bins,seed,mse_before,mse_after,pct_change,alarms"]
    for cell in sorted(cells, key=lambda c: c.run_id):
        pct = 100.0 * (cell.mse_after - cell.mse_before) / cell.mse_before
        lines.append(
            f"{cell.run_id},{fmt(cell.alpha)},{cell.horizon},{cell.bins},{cell.seed},"
            f"{fmt(cell.mse_before)},{fmt(cell.mse_after)},{fmt(pct)},{cell.alarm_count}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_alarm_log_csv(path: Path | str, rows: list[tuple[str, int, float, float, str]]) -> None:
    lines = ["run_id,stream_index,s,s_min,action"]
    for rid, index, s, s_min, action in sorted(rows, key=lambda r: (r[0], r[1])):
        lines.append(f"{rid},{index},{fmt(s)},{fmt(s_min)},{action}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Experiment manifest


@dataclass(frozen=True)
class ExperimentManifest:
    """Everything needed to reproduce a full experiment byte for byte."""

    seeds: tuple[int, ...] = (0, 1, 2)
    bins: tuple[int, ...] = (25, 50)
    horizons: tuple[int, ...] = (2, 5, 10, 15)
    alphas: tuple[float, ...] = (0.0, 0.5)  # guided variants; baseline (1.0) implied
    temperature: float = 4.0
    readout: str = "argmax"
    lookback: int = 8
    hidden: int = 128
    dropout_rate: float = 0.2
    mg: MgParams = MgParams()
    split: SplitSpec = SplitSpec()
    epochs: int = 50
    batch_size: int = 128
    lr: float = 1e-4
    patience: int = 5
    min_delta: float = 1e-4
    ph: dict | None = None  # per-bins {"delta": .., "threshold": ..}; None = defaults
    ph_window_len: int = 3
    ph_retrain_epochs: int = 3

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            patience=self.patience,
            min_delta=self.min_delta,
            seed=seed,
        )

    def ph_params(self, bins: int) -> PhParams:
        table = {int(k): v for k, v in (self.ph or {}).items()}
        entry = table.get(bins) or DEFAULT_PH.get(bins)
        if entry is None:
            raise ConfigError(f"no Page-Hinkley parameters configured for bins={bins}")
        return PhParams(
            delta=float(entry["delta"]),
            threshold=float(entry["threshold"]),
            window_len=self.ph_window_len,
            retrain_epochs=self.ph_retrain_epochs,
        )

    def to_dict(self) -> dict:
        return {
            "toolkit_version": TOOLKIT_VERSION,
            "seeds": list(self.seeds),
            "bins": list(self.bins),
            "horizons": list(self.horizons),
            "alphas": list(self.alphas),
            "temperature": self.temperature,
            "readout": self.readout,
            "lookback": self.lookback,
            "hidden": self.hidden,
            "dropout_rate": self.dropout_rate,
            "mg": dataclasses.asdict(self.mg),
            "split": dataclasses.asdict(self.split),
            "train": {
                "epochs": self.epochs,
                "batch_size": self.batch_size,
                "lr": self.lr,
                "patience": self.patience,
                "min_delta": self.min_delta,
            },
            "ph": {
                "per_bins": self.ph if self.ph is not None else DEFAULT_PH,
                "window_len": self.ph_window_len,
                "retrain_epochs": self.ph_retrain_epochs,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentManifest":
        train = data.get("train", {})
        ph = data.get("ph", {})
        return cls(
            seeds=tuple(data.get("seeds", (0, 1, 2))),
            bins=tuple(data.get("bins", (25, 50))),
            horizons=tuple(data.get("horizons", (2, 5, 10, 15))),
            alphas=tuple(data.get("alphas", (0.0, 0.5))),
            temperature=data.get("temperature", 4.0),
            readout=data.get("readout", "argmax"),
            lookback=data.get("lookback", 8),
            hidden=data.get("hidden", 128),
            dropout_rate=data.get("dropout_rate", 0.2),
            mg=MgParams(**data.get("mg", {})),
            split=SplitSpec(**data.get("split", {})),
            epochs=train.get("epochs", 50),
            batch_size=train.get("batch_size", 128),
            lr=train.get("lr", 1e-4),
            patience=train.get("patience", 5),
            min_delta=train.get("min_delta", 1e-4),
            ph={int(k): v for k, v in ph["per_bins"].items()} if "per_bins" in ph else None,
            ph_window_len=ph.get("window_len", 3),
            ph_retrain_epochs=ph.get("retrain_epochs", 3),
        )


def write_manifest(path: Path | str, manifest: ExperimentManifest, extra: dict | None = None) -> None:
    payload = manifest.to_dict()
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_manifest(path: Path | str) -> ExperimentManifest:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    return ExperimentManifest.from_dict(data)


def binspec_to_dict(spec: BinSpec) -> dict:
    return {"n_bins": spec.n_bins, "lo": spec.lo, "hi": spec.hi}
