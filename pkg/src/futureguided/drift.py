"""Page-Hinkley change detection over a forecast-error stream, with bounded retraining.

The detector tracks the one-sided cumulative deviation of errors above their
running mean; an alarm fires when the deviation exceeds the threshold. On
alarm the model is retrained for a few epochs on the most recent samples and
the detector statistics are reset. The protocol is identical for guided and
unguided models so adapted results stay comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .fgl import TrainConfig
from .neural import (
    RnnBackbone,
    adam_step,
    backward,
    clone_model,
    forward_batch,
    init_adam,
    log_softmax,
    softmax_t,
)
from .quantizer import BinSpec, quantize_array, readout_values

RETRAIN_WINDOW = 128  # most recent samples used for a retraining pass (one batch)


@dataclass(frozen=True)
class PhParams:
    delta: float  # per-step tolerance subtracted from each deviation
    threshold: float  # alarm level on S - S_min
    window_len: int = 3
    retrain_epochs: int = 3
    windowed_mean: bool = False  # recompute the mean over the last window_len errors
    # at every step instead of cumulatively (non-default variant)

    def __post_init__(self) -> None:
        if self.delta < 0 or self.threshold <= 0:
            raise DomainError(
                f"need delta >= 0 and threshold > 0, got {self.delta}, {self.threshold}"
            )


@dataclass(frozen=True)
class PhState:
    """Detector statistics.

    The running mean is stored relative to the first observed error
    (``anchor`` plus ``mean_offset``): all arithmetic then happens on error
    differences, so adding a constant to every input shifts only the anchor
    and leaves every deviation, S value, and alarm bitwise unchanged.
    """

    anchor: float = 0.0
    mean_offset: float = 0.0
    s: float = 0.0
    s_min: float = 0.0
    count: int = 0
    recent: tuple[float, ...] = ()

    @property
    def mean(self) -> float:
        return self.anchor + self.mean_offset


def ph_update(state: PhState, error: float, params: PhParams) -> tuple[PhState, bool]:
    """Advance the detector by one error observation; returns (state, alarm).

    The first observation only seeds the running mean; deviations accumulate
    from the second sample on.
    """
    if not math.isfinite(error) or error < 0:
        raise DomainError(f"errors must be finite and non-negative, got {error}")
    recent = (state.recent + (error,))[-params.window_len :]
    if state.count == 0:
        return replace(state, anchor=error, mean_offset=0.0, count=1, recent=recent), False
    diff = error - state.anchor
    u = diff - state.mean_offset - params.delta
    s = state.s + u
    s_min = min(state.s_min, s)
    alarm = (s - s_min) > params.threshold
    count = state.count + 1
    if params.windowed_mean:
        offset = float(np.mean([r - state.anchor for r in recent]))
    else:
        offset = state.mean_offset + (diff - state.mean_offset) / count
    return (
        PhState(
            anchor=state.anchor,
            mean_offset=offset,
            s=s,
            s_min=s_min,
            count=count,
            recent=recent,
        ),
        alarm,
    )


def ph_reset(state: PhState, recent_errors: tuple[float, ...], params: PhParams) -> PhState:
    """Zero the deviation statistics and reseed the mean from a small buffer.

    With an empty buffer the detector re-initializes from the next observation.
    """
    buffer = tuple(recent_errors)[-params.window_len :]
    if not buffer:
        return PhState()
    return PhState(
        anchor=buffer[0],
        mean_offset=float(np.mean([b - buffer[0] for b in buffer])),
        s=0.0,
        s_min=0.0,
        count=len(buffer),
        recent=buffer,
    )


@dataclass(frozen=True)
class AlarmEvent:
    stream_index: int
    s: float
    s_min: float
    action: str  # "retrain" or "revert"


@dataclass(frozen=True)
class DriftResult:
    mse_before: float  # static model over the whole stream
    mse_after: float  # online walk with retraining (prequential errors)
    alarms: tuple[AlarmEvent, ...]
    model: RnnBackbone  # adapted copy; the input model is never touched


def _stream_errors(
    model: RnnBackbone,
    windows: np.ndarray,
    targets: np.ndarray,
    spec: BinSpec,
    readout: str,
) -> np.ndarray:
    logits, _ = forward_batch(model, windows, training=False)
    predicted = readout_values(softmax_t(logits, 1.0), spec, readout)
    return (predicted - targets) ** 2


def _retrain(
    model: RnnBackbone,
    windows: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    epochs: int,
    rng: np.random.Generator,
) -> bool:
    """A few task-loss epochs on one batch of recent samples.

    Returns False (and leaves the model restored to its pre-retrain state) if
    the loss goes non-finite.
    """
    snapshot = model.snapshot()
    optimizer = init_adam(model, cfg.lr)
    eye = np.eye(model.n_bins)
    for _ in range(epochs):
        logits, trace = forward_batch(model, windows, training=True, rng=rng)
        logp = log_softmax(logits)
        loss = float(-logp[np.arange(len(labels)), labels].mean())
        if not np.isfinite(loss):
            model.restore(snapshot)
            return False
        d_logits = (softmax_t(logits, 1.0) - eye[labels]) / len(labels)
        adam_step(model, backward(model, trace, d_logits), optimizer)
    return True


def drift_run(
    model: RnnBackbone,
    windows: np.ndarray,
    targets: np.ndarray,
    spec: BinSpec,
    ph: PhParams,
    cfg: TrainConfig,
    readout: str = "argmax",
    seed: int = 0,
) -> DriftResult:
    """Walk a chronological test stream with Page-Hinkley retraining.

    Per-sample squared errors (decoded prediction vs raw target) feed the
    detector. On alarm the model is retrained for ``ph.retrain_epochs`` epochs
    on the last ``RETRAIN_WINDOW`` stream samples, then the detector resets.
    Between alarms the model is static, so its forecasts over the remaining
    stream are computed in one batch.
    """
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64)
    labels = quantize_array(targets, spec)
    n = len(targets)
    rng = np.random.default_rng(seed)

    adapted = clone_model(model)
    errors_static = _stream_errors(model, windows, targets, spec, readout)

    online_errors = np.empty(n)
    alarms: list[AlarmEvent] = []
    state = PhState()
    pending = _stream_errors(adapted, windows, targets, spec, readout)
    i = 0
    while i < n:
        error = float(pending[i])
        online_errors[i] = error
        state, alarm = ph_update(state, error, ph)
        if alarm:
            lo = max(0, i - RETRAIN_WINDOW + 1)
            ok = _retrain(
                adapted, windows[lo : i + 1], labels[lo : i + 1], cfg, ph.retrain_epochs, rng
            )
            alarms.append(
                AlarmEvent(
                    stream_index=i,
                    s=state.s,
                    s_min=state.s_min,
                    action="retrain" if ok else "revert",
                )
            )
            state = ph_reset(state, state.recent, ph)
            if ok and i + 1 < n:
                pending[i + 1 :] = _stream_errors(
                    adapted, windows[i + 1 :], targets[i + 1 :], spec, readout
                )
        i += 1

    return DriftResult(
        mse_before=float(errors_static.mean()),
        mse_after=float(online_errors.mean()),
        alarms=tuple(alarms),
        model=adapted,
    )
