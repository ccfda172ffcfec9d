"""Future-guided training: a frozen next-step teacher distilled into an n-step student.

The student minimizes

    alpha * CE(student_logits, hard_label)
      + (1 - alpha) * tau^2 * KL(softmax(teacher_logits / tau) || softmax(student_logits / tau))

where the teacher sees the window ending n-1 steps later than the student's,
so both predict the same target value. alpha = 1 degenerates to plain
cross-entropy training and is bit-identical to a baseline trained without a
teacher (the distillation term contributes exactly zero to loss and gradient).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .mackey_glass import WindowedDataset
from .neural import (
    RnnBackbone,
    adam_step,
    backward,
    cross_entropy,
    forward_batch,
    init_adam,
    init_model,
    kl_div,
    log_softmax,
    softmax_t,
)
from .quantizer import BinSpec, one_hot, quantize_array, readout_values

EVAL_CHUNK = 4096


@dataclass(frozen=True)
class FglConfig:
    alpha: float
    temperature: float = 4.0
    teacher_horizon: int = 1
    student_horizon: int = 5

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.teacher_horizon != 1:
            raise ConfigError("teacher horizon is fixed at 1 (next-step forecasting)")
        if self.student_horizon <= self.teacher_horizon:
            raise ConfigError(
                f"student horizon ({self.student_horizon}) must exceed the teacher's"
            )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    lr: float = 1e-4
    patience: int = 5
    min_delta: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.epochs, self.batch_size, self.patience) < 1 or self.lr <= 0:
            raise ConfigError(f"invalid training configuration: {self}")


@dataclass(frozen=True)
class PairedDataset:
    """Aligned student/teacher windows sharing the target at t + n.

    For sample i the student window ends at index t, the teacher window at
    t + n - 1, and the shared target is the raw series value at t + n.
    """

    lookback: int
    student_horizon: int
    student_windows: np.ndarray  # (n, lookback)
    teacher_windows: np.ndarray  # (n, lookback)
    targets: np.ndarray  # (n,) raw values

    def __len__(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_xent: float


def fgl_loss(
    student_logits: np.ndarray,
    teacher_logits: np.ndarray,
    label: int,
    cfg: FglConfig,
) -> float:
    """Blended task + distillation loss for a single sample."""
    tau = cfg.temperature
    task = cross_entropy(student_logits, label)
    guide = kl_div(softmax_t(teacher_logits, tau), softmax_t(student_logits, tau))
    return cfg.alpha * task + (1.0 - cfg.alpha) * tau**2 * guide


def fgl_loss_grad(
    student_logits: np.ndarray,
    teacher_logits: np.ndarray,
    label: int,
    cfg: FglConfig,
) -> np.ndarray:
    """Exact gradient of ``fgl_loss`` with respect to the student logits."""
    tau = cfg.temperature
    n_bins = np.asarray(student_logits).shape[-1]
    task = softmax_t(student_logits, 1.0) - one_hot(label, n_bins)
    guide = tau * (softmax_t(student_logits, tau) - softmax_t(teacher_logits, tau))
    return cfg.alpha * task + (1.0 - cfg.alpha) * guide


def build_paired_dataset(
    split_values: np.ndarray, lookback: int, student_horizon: int
) -> PairedDataset:
    series = np.asarray(split_values, dtype=np.float64)
    n = student_horizon
    count = len(series) - lookback - n + 1
    if count < 1:
        raise ConfigError(
            f"split of length {len(series)} too short for lookback={lookback}, horizon={n}"
        )
    windows = np.lib.stride_tricks.sliding_window_view(series, lookback)
    return PairedDataset(
        lookback=lookback,
        student_horizon=n,
        student_windows=windows[:count].copy(),
        teacher_windows=windows[n - 1 : n - 1 + count].copy(),
        targets=series[lookback - 1 + n : lookback - 1 + n + count].copy(),
    )


def predict_probs(model: RnnBackbone, windows: np.ndarray) -> np.ndarray:
    """Inference-mode class probabilities, chunked to bound memory."""
    windows = np.atleast_2d(windows)
    out = np.empty((len(windows), model.n_bins))
    for start in range(0, len(windows), EVAL_CHUNK):
        chunk = windows[start : start + EVAL_CHUNK]
        logits, _ = forward_batch(model, chunk, training=False)
        out[start : start + len(chunk)] = softmax_t(logits, 1.0)
    return out


def evaluate_mse(
    model: RnnBackbone,
    windows: np.ndarray,
    targets: np.ndarray,
    spec: BinSpec,
    readout: str = "argmax",
) -> float:
    """Test-time MSE of decoded predictions against raw targets."""
    predicted = readout_values(predict_probs(model, windows), spec, readout)
    return float(np.mean((predicted - np.asarray(targets, dtype=np.float64)) ** 2))


def _validation_xent(model: RnnBackbone, windows: np.ndarray, labels: np.ndarray) -> float:
    total = 0.0
    for start in range(0, len(windows), EVAL_CHUNK):
        chunk = windows[start : start + EVAL_CHUNK]
        logits, _ = forward_batch(model, chunk, training=False)
        logp = log_softmax(logits)
        total -= logp[np.arange(len(chunk)), labels[start : start + len(chunk)]].sum()
    return total / len(windows)


def _fit(
    model: RnnBackbone,
    inputs: np.ndarray,
    labels: np.ndarray,
    teacher_probs: np.ndarray | None,
    val_inputs: np.ndarray,
    val_labels: np.ndarray,
    alpha: float,
    tau: float,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> list[EpochStats]:
    """Shared minibatch loop with early stopping on validation cross-entropy.

    ``teacher_probs`` are the teacher's temperature-tau probabilities for every
    training sample, precomputed once (the teacher is frozen, so its outputs
    never change across epochs). Early stopping monitors the task term only so
    guided and unguided runs stop on directly comparable quantities; the best
    checkpoint is restored before returning.
    """
    n = len(inputs)
    n_bins = model.n_bins
    eye = np.eye(n_bins)
    if teacher_probs is not None:
        # Per-sample sum p_t * ln p_t, the constant part of the KL term.
        pt_safe = np.maximum(teacher_probs, 1e-300)
        teacher_selfinfo = np.sum(teacher_probs * np.log(pt_safe), axis=1)

    optimizer = init_adam(model, cfg.lr)
    history: list[EpochStats] = []
    best_val = np.inf
    best_snapshot = model.snapshot()
    bad_epochs = 0

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            x = inputs[batch]
            y = labels[batch]
            logits, trace = forward_batch(model, x, training=True, rng=rng)

            logp = log_softmax(logits)
            task = float(-logp[np.arange(len(batch)), y].mean())
            d_logits = alpha * (softmax_t(logits, 1.0) - eye[y])
            loss = alpha * task
            if teacher_probs is not None:
                pt = teacher_probs[batch]
                logp_tau = log_softmax(logits / tau)
                guide = float(
                    (teacher_selfinfo[batch] - np.sum(pt * logp_tau, axis=1)).mean()
                )
                loss += (1.0 - alpha) * tau**2 * guide
                d_logits += (1.0 - alpha) * tau * (np.exp(logp_tau) - pt)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch index {start // cfg.batch_size}"
                )
            grads = backward(model, trace, d_logits / len(batch))
            adam_step(model, grads, optimizer)
            epoch_loss += loss * len(batch)

        val_xent = _validation_xent(model, val_inputs, val_labels)
        history.append(EpochStats(epoch=epoch, train_loss=epoch_loss / n, val_xent=val_xent))
        if val_xent < best_val - cfg.min_delta:
            best_val = val_xent
            best_snapshot = model.snapshot()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break

    model.restore(best_snapshot)
    return history


def train_teacher(
    train_ds: WindowedDataset,
    val_ds: WindowedDataset,
    spec: BinSpec,
    cfg: TrainConfig,
    hidden: int = 128,
    dropout_rate: float = 0.2,
) -> tuple[RnnBackbone, list[EpochStats]]:
    """Train the next-step forecaster on quantized targets.

    The returned model is the best validation checkpoint and should be treated
    as frozen from here on.
    """
    if train_ds.horizon != 1 or val_ds.horizon != 1:
        raise ConfigError("teacher datasets must use horizon 1")
    if len(train_ds) == 0:
        raise ConfigError("empty teacher training set")
    rng = np.random.default_rng(cfg.seed)
    model = init_model(hidden, spec.n_bins, dropout_rate, rng)
    history = _fit(
        model,
        train_ds.inputs,
        quantize_array(train_ds.targets, spec),
        None,
        val_ds.inputs,
        quantize_array(val_ds.targets, spec),
        alpha=1.0,
        tau=1.0,
        cfg=cfg,
        rng=rng,
    )
    return model, history


def train_student(
    train_pairs: PairedDataset,
    val_pairs: PairedDataset,
    teacher: RnnBackbone | None,
    spec: BinSpec,
    fgl_cfg: FglConfig,
    cfg: TrainConfig,
    hidden: int = 128,
    dropout_rate: float = 0.2,
) -> tuple[RnnBackbone, list[EpochStats]]:
    """Train the n-step student, optionally guided by a frozen teacher.

    ``teacher=None`` trains the unguided baseline through the identical code
    path. The teacher runs in inference mode (no dropout, no randomness) and
    receives no gradient.
    """
    teacher_probs = None
    if teacher is not None:
        if teacher.n_bins != spec.n_bins:
            raise ConfigError(
                f"teacher produces {teacher.n_bins} classes but the bin spec has {spec.n_bins}"
            )
        teacher_probs = np.empty((len(train_pairs), spec.n_bins))
        for start in range(0, len(train_pairs), EVAL_CHUNK):
            chunk = train_pairs.teacher_windows[start : start + EVAL_CHUNK]
            logits, _ = forward_batch(teacher, chunk, training=False)
            teacher_probs[start : start + len(chunk)] = softmax_t(
                logits, fgl_cfg.temperature
            )

    rng = np.random.default_rng(cfg.seed)
    model = init_model(hidden, spec.n_bins, dropout_rate, rng)
    history = _fit(
        model,
        train_pairs.student_windows,
        quantize_array(train_pairs.targets, spec),
        teacher_probs,
        val_pairs.student_windows,
        quantize_array(val_pairs.targets, spec),
        alpha=fgl_cfg.alpha,
        tau=fgl_cfg.temperature,
        cfg=cfg,
        rng=rng,
    )
    return model, history
