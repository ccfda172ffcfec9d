"""Mackey-Glass trajectory generation, chronological splits, and windowing.

The delay differential equation

    dP/dt = beta0 * theta^n * P(t - tau) / (theta^n + P(t - tau)^n) - gamma * P(t)

is integrated by explicit Euler with the delay stored as an index offset,
so ``dt`` must divide the delay exactly (here ``tau_delay`` is given in steps).
Pre-history P(t) for t <= 0 is the constant initial value ``p0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, IntegrationError

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class MgParams:
    """Parameters of the delay equation and of the requested trajectory."""

    tau_delay: int = 17
    beta0: float = 0.2
    theta: float = 1.0
    n_exp: float = 10.0
    gamma: float = 0.1
    dt: float = 1.0
    p0: float = 0.9
    length: int = 10_000

    def validate(self) -> None:
        if self.tau_delay < 1:
            raise ConfigError(f"tau_delay must be >= 1, got {self.tau_delay}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.length <= self.tau_delay:
            raise ConfigError(
                f"length ({self.length}) must exceed tau_delay ({self.tau_delay})"
            )
        for name in ("beta0", "gamma", "theta"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class Trajectory:
    values: np.ndarray
    dt: float


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2

    def validate(self) -> None:
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f <= 0 for f in fracs):
            raise ConfigError(f"split fractions must be positive, got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fracs)}")


@dataclass(frozen=True)
class WindowedDataset:
    """Sliding windows of length ``lookback`` paired with targets ``horizon`` steps ahead.

    inputs[i] = series[i : i+lookback], targets[i] = series[i+lookback-1+horizon].
    """

    lookback: int
    horizon: int
    inputs: np.ndarray  # (n, lookback)
    targets: np.ndarray  # (n,)

    def __len__(self) -> int:
        return len(self.targets)


def mg_derivative(p_delayed: float, p_now: float, params: MgParams) -> float:
    """Right-hand side of the delay equation at one point."""
    if not (math.isfinite(p_delayed) and math.isfinite(p_now)):
        raise DomainError(f"non-finite state: p_delayed={p_delayed}, p_now={p_now}")
    theta_n = params.theta**params.n_exp
    growth = params.beta0 * theta_n * p_delayed / (theta_n + p_delayed**params.n_exp)
    return growth - params.gamma * p_now


def generate(params: MgParams) -> Trajectory:
    """Integrate the delay equation by explicit Euler.

    Deterministic: no randomness is involved, so equal params give
    bit-identical trajectories.
    """
    params.validate()
    values = np.empty(params.length, dtype=np.float64)
    values[0] = params.p0
    for k in range(params.length - 1):
        delayed = values[k - params.tau_delay] if k >= params.tau_delay else params.p0
        values[k + 1] = values[k] + params.dt * mg_derivative(delayed, values[k], params)
        if abs(values[k + 1]) > DIVERGENCE_LIMIT:
            raise IntegrationError(
                f"trajectory diverged at step {k + 1}: |value| > {DIVERGENCE_LIMIT:g}"
            )
    return Trajectory(values=values, dt=params.dt)


def split(
    trajectory: Trajectory, spec: SplitSpec = SplitSpec()
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Contiguous chronological train/validation/test segments.

    Segment lengths are floor(frac * len); any remainder goes to the test
    segment so that no point is dropped.
    """
    spec.validate()
    n = len(trajectory.values)
    n_train = int(math.floor(spec.train_frac * n))
    n_val = int(math.floor(spec.val_frac * n))
    n_test = n - n_train - n_val
    if n_train == 0 or n_val == 0 or n_test <= 0:
        raise ConfigError(f"empty split segment for length {n} and spec {spec}")
    values = trajectory.values
    return (
        values[:n_train],
        values[n_train : n_train + n_val],
        values[n_train + n_val :],
    )


def make_windows(series: np.ndarray, lookback: int, horizon: int) -> WindowedDataset:
    """Build all (window, target) pairs inside one split.

    Call per split segment so that no window straddles a split boundary.
    """
    series = np.asarray(series, dtype=np.float64)
    if lookback < 1 or horizon < 1:
        raise ConfigError(f"lookback and horizon must be >= 1, got {lookback}, {horizon}")
    count = len(series) - lookback - horizon + 1
    if count < 1:
        raise ConfigError(
            f"series of length {len(series)} too short for lookback={lookback}, horizon={horizon}"
        )
    inputs = np.lib.stride_tricks.sliding_window_view(series, lookback)[:count].copy()
    targets = series[lookback - 1 + horizon : lookback - 1 + horizon + count].copy()
    return WindowedDataset(lookback=lookback, horizon=horizon, inputs=inputs, targets=targets)
