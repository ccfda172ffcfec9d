"""Recurrent forecasting network with exact analytic gradients.

Architecture: the lookback window is consumed as a length-L sequence of scalar
features by a 2-layer tanh recurrent backbone (hidden size H); the final
layer-2 hidden state passes through dropout and a two-layer head
FC(H->H) -> relu -> FC(H->n_bins) to produce logits.

Gradients are computed by hand (backpropagation through time); there is no
autodiff anywhere. ``backward`` is validated against central finite
differences in the test suite.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, NumericError

NUM_LAYERS = 2

KL_PROB_FLOOR = 1e-12

CHECKPOINT_MAGIC = b"FGRNN001"


@dataclass
class RnnBackbone:
    hidden: int
    n_bins: int
    dropout_rate: float
    w_ih: list[np.ndarray]  # per layer, (H, in_features)
    w_hh: list[np.ndarray]  # per layer, (H, H)
    b_h: list[np.ndarray]  # per layer, (H,)
    w_fc1: np.ndarray  # (H, H)
    b_fc1: np.ndarray  # (H,)
    w_fc2: np.ndarray  # (n_bins, H)
    b_fc2: np.ndarray  # (n_bins,)

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for layer in range(NUM_LAYERS):
            out.append((f"w_ih.{layer}", self.w_ih[layer]))
            out.append((f"w_hh.{layer}", self.w_hh[layer]))
            out.append((f"b_h.{layer}", self.b_h[layer]))
        out.extend(
            [
                ("w_fc1", self.w_fc1),
                ("b_fc1", self.b_fc1),
                ("w_fc2", self.w_fc2),
                ("b_fc2", self.b_fc2),
            ]
        )
        return out

    def set_param(self, name: str, value: np.ndarray) -> None:
        if "." in name:
            base, layer = name.split(".")
            getattr(self, base)[int(layer)] = value
        else:
            setattr(self, name, value)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.named_params()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        for name, arr in snapshot.items():
            self.set_param(name, arr.copy())

    def params_hash(self) -> str:
        digest = hashlib.sha256()
        for name, arr in self.named_params():
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return digest.hexdigest()


def init_model(
    hidden: int, n_bins: int, dropout_rate: float, rng: np.random.Generator
) -> RnnBackbone:
    """Uniform +-1/sqrt(fan_in) initialization per tensor, in a fixed draw order."""
    if hidden < 1 or n_bins < 2:
        raise ConfigError(f"bad sizes: hidden={hidden}, n_bins={n_bins}")
    if not 0.0 <= dropout_rate < 1.0:
        raise ConfigError(f"dropout_rate must be in [0, 1), got {dropout_rate}")

    def draw(shape: tuple[int, ...], fan_in: int) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    w_ih, w_hh, b_h = [], [], []
    for layer in range(NUM_LAYERS):
        in_features = 1 if layer == 0 else hidden
        w_ih.append(draw((hidden, in_features), in_features))
        w_hh.append(draw((hidden, hidden), hidden))
        b_h.append(draw((hidden,), hidden))
    return RnnBackbone(
        hidden=hidden,
        n_bins=n_bins,
        dropout_rate=dropout_rate,
        w_ih=w_ih,
        w_hh=w_hh,
        b_h=b_h,
        w_fc1=draw((hidden, hidden), hidden),
        b_fc1=draw((hidden,), hidden),
        w_fc2=draw((n_bins, hidden), hidden),
        b_fc2=draw((n_bins,), hidden),
    )


@dataclass
class ForwardTrace:
    """Everything needed to replay the forward pass exactly."""

    inputs: np.ndarray  # (n, L)
    h1: np.ndarray  # (L, n, H) hidden states of layer 1
    h2: np.ndarray  # (L, n, H) hidden states of layer 2
    dropout_mask: np.ndarray | None  # (n, H), already scaled by 1/(1-rate)
    dropped: np.ndarray  # (n, H) input to FC1
    fc1_pre: np.ndarray  # (n, H) pre-relu
    fc1_act: np.ndarray  # (n, H) post-relu
    logits: np.ndarray  # (n, n_bins)
    training: bool


@dataclass
class GradientSet:
    w_ih: list[np.ndarray]
    w_hh: list[np.ndarray]
    b_h: list[np.ndarray]
    w_fc1: np.ndarray
    b_fc1: np.ndarray
    w_fc2: np.ndarray
    b_fc2: np.ndarray

    def named(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for layer in range(NUM_LAYERS):
            out.append((f"w_ih.{layer}", self.w_ih[layer]))
            out.append((f"w_hh.{layer}", self.w_hh[layer]))
            out.append((f"b_h.{layer}", self.b_h[layer]))
        out.extend(
            [
                ("w_fc1", self.w_fc1),
                ("b_fc1", self.b_fc1),
                ("w_fc2", self.w_fc2),
                ("b_fc2", self.b_fc2),
            ]
        )
        return out


def _check_finite(logits: np.ndarray, trace: ForwardTrace) -> None:
    if np.isfinite(logits).all():
        return
    for name, arr in (
        ("h1", trace.h1),
        ("h2", trace.h2),
        ("fc1_pre", trace.fc1_pre),
        ("logits", logits),
    ):
        if not np.isfinite(arr).all():
            raise NumericError(f"non-finite values in tensor {name!r}")
    raise NumericError("non-finite logits")


def forward_batch(
    model: RnnBackbone,
    windows: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardTrace]:
    """Run the network over a batch of windows, shape (n, L).

    Inference mode (training=False) draws no randomness at all, so frozen
    models produce bit-identical outputs run to run.
    """
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    n, seq_len = windows.shape
    hidden = model.hidden
    h1 = np.empty((seq_len, n, hidden))
    h2 = np.empty((seq_len, n, hidden))
    h1_prev = np.zeros((n, hidden))
    h2_prev = np.zeros((n, hidden))
    for t in range(seq_len):
        x_t = windows[:, t : t + 1]  # (n, 1) scalar feature per step
        h1_prev = np.tanh(x_t @ model.w_ih[0].T + h1_prev @ model.w_hh[0].T + model.b_h[0])
        h2_prev = np.tanh(
            h1_prev @ model.w_ih[1].T + h2_prev @ model.w_hh[1].T + model.b_h[1]
        )
        h1[t] = h1_prev
        h2[t] = h2_prev

    mask = None
    dropped = h2_prev
    if training and model.dropout_rate > 0.0:
        if rng is None:
            raise ConfigError("training forward with dropout requires an rng")
        keep = 1.0 - model.dropout_rate
        mask = (rng.random((n, hidden)) < keep).astype(np.float64) / keep
        dropped = h2_prev * mask

    fc1_pre = dropped @ model.w_fc1.T + model.b_fc1
    fc1_act = np.maximum(fc1_pre, 0.0)
    logits = fc1_act @ model.w_fc2.T + model.b_fc2
    trace = ForwardTrace(
        inputs=windows,
        h1=h1,
        h2=h2,
        dropout_mask=mask,
        dropped=dropped,
        fc1_pre=fc1_pre,
        fc1_act=fc1_act,
        logits=logits,
        training=training,
    )
    _check_finite(logits, trace)
    return logits, trace


def forward(
    model: RnnBackbone,
    window: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardTrace]:
    """Single-window forward pass; returns (n_bins,) logits."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 1:
        raise ConfigError(f"expected a 1-D window, got shape {window.shape}")
    logits, trace = forward_batch(model, window[None, :], training=training, rng=rng)
    return logits[0], trace


def backward(model: RnnBackbone, trace: ForwardTrace, d_logits: np.ndarray) -> GradientSet:
    """Exact gradients of a scalar loss given dLoss/dLogits.

    ``d_logits`` must already include any batch-mean scaling; the returned
    gradients are then the exact derivatives of that scalar loss.
    """
    d_logits = np.atleast_2d(np.asarray(d_logits, dtype=np.float64))
    if d_logits.shape != trace.logits.shape:
        raise ConfigError(
            f"d_logits shape {d_logits.shape} does not match trace {trace.logits.shape}"
        )
    n, seq_len = trace.inputs.shape
    hidden = model.hidden

    # Head.
    d_w_fc2 = d_logits.T @ trace.fc1_act
    d_b_fc2 = d_logits.sum(axis=0)
    d_fc1_act = d_logits @ model.w_fc2
    d_fc1_pre = d_fc1_act * (trace.fc1_pre > 0.0)
    d_w_fc1 = d_fc1_pre.T @ trace.dropped
    d_b_fc1 = d_fc1_pre.sum(axis=0)
    d_dropped = d_fc1_pre @ model.w_fc1
    if trace.dropout_mask is not None:
        d_h2_t = d_dropped * trace.dropout_mask
    else:
        d_h2_t = d_dropped

    d_w_ih = [np.zeros_like(model.w_ih[i]) for i in range(NUM_LAYERS)]
    d_w_hh = [np.zeros_like(model.w_hh[i]) for i in range(NUM_LAYERS)]
    d_b_h = [np.zeros_like(model.b_h[i]) for i in range(NUM_LAYERS)]
    d_h1_t = np.zeros((n, hidden))

    # Backpropagation through time; layer 2 feeds gradient into layer 1 at
    # every step because it consumes h1[t] as its input.
    for t in range(seq_len - 1, -1, -1):
        h1_prev = trace.h1[t - 1] if t > 0 else np.zeros((n, hidden))
        h2_prev = trace.h2[t - 1] if t > 0 else np.zeros((n, hidden))

        d_a2 = d_h2_t * (1.0 - trace.h2[t] ** 2)
        d_w_ih[1] += d_a2.T @ trace.h1[t]
        d_w_hh[1] += d_a2.T @ h2_prev
        d_b_h[1] += d_a2.sum(axis=0)
        d_h1_t = d_h1_t + d_a2 @ model.w_ih[1]
        d_h2_t = d_a2 @ model.w_hh[1]

        d_a1 = d_h1_t * (1.0 - trace.h1[t] ** 2)
        d_w_ih[0] += d_a1.T @ trace.inputs[:, t : t + 1]
        d_w_hh[0] += d_a1.T @ h1_prev
        d_b_h[0] += d_a1.sum(axis=0)
        d_h1_t = d_a1 @ model.w_hh[0]

    return GradientSet(
        w_ih=d_w_ih,
        w_hh=d_w_hh,
        b_h=d_b_h,
        w_fc1=d_w_fc1,
        b_fc1=d_b_fc1,
        w_fc2=d_w_fc2,
        b_fc2=d_b_fc2,
    )


def softmax_t(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Temperature-scaled softmax along the last axis; shift-invariant and stable."""
    if temperature <= 0:
        raise DomainError(f"temperature must be positive, got {temperature}")
    logits = np.asarray(logits, dtype=np.float64)
    z = (logits - logits.max(axis=-1, keepdims=True)) / temperature
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits: np.ndarray, label: int) -> float:
    """Negative log-probability of the hard label, computed in log-space."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[-1]:
        raise DomainError(f"label {label} outside [0, {logits.shape[-1]})")
    return float(-log_softmax(logits)[..., label])


def cross_entropy_mean(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy over a batch of logits rows."""
    logp = log_softmax(np.atleast_2d(logits))
    return float(-logp[np.arange(len(labels)), labels].mean())


def kl_div(p_teacher: np.ndarray, p_student: np.ndarray) -> float:
    """KL(p_teacher || p_student), with 0*ln(0/q) = 0 and the student floored."""
    p_t = np.asarray(p_teacher, dtype=np.float64)
    p_s = np.maximum(np.asarray(p_student, dtype=np.float64), KL_PROB_FLOOR)
    support = p_t > 0.0
    return float(np.sum(p_t[support] * (np.log(p_t[support]) - np.log(p_s[support]))))


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_adam(model: RnnBackbone, lr: float) -> AdamState:
    state = AdamState(lr=lr)
    for name, arr in model.named_params():
        state.m[name] = np.zeros_like(arr)
        state.v[name] = np.zeros_like(arr)
    return state


def adam_step(model: RnnBackbone, grads: GradientSet, state: AdamState) -> None:
    """Standard bias-corrected Adam update, applied in place."""
    state.t += 1
    corr1 = 1.0 - state.beta1**state.t
    corr2 = 1.0 - state.beta2**state.t
    params = dict(model.named_params())
    for name, grad in grads.named():
        if grad.shape != params[name].shape:
            raise ConfigError(f"gradient shape mismatch for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad**2
        params[name] -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)


def save_checkpoint(model: RnnBackbone, path) -> None:
    """Flat binary checkpoint: magic, shape table, little-endian f64 payload."""
    tensors = model.named_params() + [
        ("dropout_rate", np.array([model.dropout_rate], dtype=np.float64))
    ]
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors:
            encoded = name.encode()
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> RnnBackbone:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ConfigError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        (count,) = struct.unpack("<I", fh.read(4))
        shapes: list[tuple[str, tuple[int, ...]]] = []
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode()
            (ndim,) = struct.unpack("<B", fh.read(1))
            dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim)) if ndim else ()
            shapes.append((name, dims))
        tensors: dict[str, np.ndarray] = {}
        for name, dims in shapes:
            size = int(np.prod(dims)) if dims else 1
            data = np.frombuffer(fh.read(8 * size), dtype="<f8").astype(np.float64)
            tensors[name] = data.reshape(dims)
    hidden = tensors["w_hh.0"].shape[0]
    n_bins = tensors["w_fc2"].shape[0]
    return RnnBackbone(
        hidden=hidden,
        n_bins=n_bins,
        dropout_rate=float(tensors["dropout_rate"][0]),
        w_ih=[tensors[f"w_ih.{i}"] for i in range(NUM_LAYERS)],
        w_hh=[tensors[f"w_hh.{i}"] for i in range(NUM_LAYERS)],
        b_h=[tensors[f"b_h.{i}"] for i in range(NUM_LAYERS)],
        w_fc1=tensors["w_fc1"],
        b_fc1=tensors["b_fc1"],
        w_fc2=tensors["w_fc2"],
        b_fc2=tensors["b_fc2"],
    )


def clone_model(model: RnnBackbone) -> RnnBackbone:
    return RnnBackbone(
        hidden=model.hidden,
        n_bins=model.n_bins,
        dropout_rate=model.dropout_rate,
        w_ih=[w.copy() for w in model.w_ih],
        w_hh=[w.copy() for w in model.w_hh],
        b_h=[b.copy() for b in model.b_h],
        w_fc1=model.w_fc1.copy(),
        b_fc1=model.b_fc1.copy(),
        w_fc2=model.w_fc2.copy(),
        b_fc2=model.b_fc2.copy(),
    )
