"""Single-node Gaussian predictive-coding simulator.

One latent cause phi with Gaussian prior (v_p, sigma_p) generates an
observation u through g(phi) with noise variance sigma_u. The log-joint

    F = 1/2 * (-ln sigma_p - (phi - v_p)^2 / sigma_p
               - ln sigma_u - (u - g(phi))^2 / sigma_u)

(additive constant fixed to 0) is the objective; its gradients give the
inference dynamics on phi, the prediction-error dynamics, and the learning
rules for the mean and both variances.

Sign conventions: ``grad_phi`` writes the prior error as (v_p - phi) / sigma_p
so that it is literally dF/dphi. The error units and ``learn_parameters`` use
eps_p = (phi - v_p) / sigma_p, under which the relaxation rule reads
dphi = eps_u * g'(phi) - eps_p; both spellings are the same gradient, and
every returned derivative here is finite-difference faithful to F.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, StepSizeError

GRAD_TOL = 1e-10
PHI_LIMIT = 1e9


@dataclass(frozen=True)
class PcModel:
    v_p: float  # prior mean
    sigma_p: float  # prior variance
    sigma_u: float  # observation variance
    phi: float  # current estimate of the cause
    eps_p: float = 0.0  # prediction error on the cause, (phi - v_p) / sigma_p at rest
    eps_u: float = 0.0  # prediction error on the state, (u - g(phi)) / sigma_u at rest
    g: str = "identity"  # generative map: "identity" or "scalar" (gain * phi)
    gain: float = 1.0

    def __post_init__(self) -> None:
        if self.sigma_p <= 0 or self.sigma_u <= 0:
            raise DomainError(f"variances must be positive: {self.sigma_p}, {self.sigma_u}")
        if self.g not in ("identity", "scalar"):
            raise DomainError(f"unknown generative map {self.g!r}")

    def g_value(self, phi: float) -> float:
        return phi if self.g == "identity" else self.gain * phi

    def g_prime(self) -> float:
        return 1.0 if self.g == "identity" else self.gain


def free_energy(model: PcModel, u: float) -> float:
    prior_err = (model.phi - model.v_p) ** 2 / model.sigma_p
    obs_err = (u - model.g_value(model.phi)) ** 2 / model.sigma_u
    return 0.5 * (-np.log(model.sigma_p) - prior_err - np.log(model.sigma_u) - obs_err)


def grad_phi(model: PcModel, u: float) -> float:
    """dF/dphi = (u - g(phi)) / sigma_u * g'(phi) + (v_p - phi) / sigma_p."""
    obs = (u - model.g_value(model.phi)) / model.sigma_u * model.g_prime()
    prior = (model.v_p - model.phi) / model.sigma_p
    return obs + prior


def relax_phi(model: PcModel, u: float, step: float, iters: int = 100_000) -> PcModel:
    """Gradient ascent on F over phi until |dF/dphi| < 1e-10.

    For the identity map the fixed point is the precision-weighted mean
    (sigma_u * v_p + sigma_p * u) / (sigma_p + sigma_u).
    """
    if step <= 0:
        raise DomainError(f"step must be positive, got {step}")
    phi = model.phi
    current = model
    for _ in range(iters):
        grad = grad_phi(current, u)
        if abs(grad) < GRAD_TOL:
            break
        phi = phi + step * grad
        if abs(phi) > PHI_LIMIT:
            raise StepSizeError(f"phi diverged past {PHI_LIMIT:g}; reduce the step size")
        current = replace(current, phi=phi)
    return current


def error_dynamics(model: PcModel, u: float, step: float, iters: int = 10_000) -> PcModel:
    """Euler-integrate the prediction-error units with phi held fixed.

    d eps_p = phi - v_p - sigma_p * eps_p
    d eps_u = u - g(phi) - sigma_u * eps_u

    Fixed points: eps_p = (phi - v_p) / sigma_p, eps_u = (u - g(phi)) / sigma_u.
    """
    if step <= 0:
        raise DomainError(f"step must be positive, got {step}")
    if step >= 2.0 / max(model.sigma_p, model.sigma_u):
        warnings.warn(
            f"step {step} is unstable for variances ({model.sigma_p}, {model.sigma_u})",
            RuntimeWarning,
            stacklevel=2,
        )
    eps_p, eps_u = model.eps_p, model.eps_u
    drive_p = model.phi - model.v_p
    drive_u = u - model.g_value(model.phi)
    for _ in range(iters):
        eps_p = eps_p + step * (drive_p - model.sigma_p * eps_p)
        eps_u = eps_u + step * (drive_u - model.sigma_u * eps_u)
    return replace(model, eps_p=eps_p, eps_u=eps_u)


def learn_parameters(model: PcModel, u: float) -> tuple[float, float, float]:
    """Gradients of F for the prior mean and the two variances.

    Reads the converged error units from the model state:

        dF/dv_p     = eps_p
        dF/dsigma_p = (eps_p^2 - 1/sigma_p) / 2
        dF/dsigma_u = (eps_u^2 - 1/sigma_u) / 2

    with eps_p = (phi - v_p) / sigma_p and eps_u = (u - g(phi)) / sigma_u.
    """
    d_v_p = model.eps_p
    d_sigma_p = 0.5 * (model.eps_p**2 - 1.0 / model.sigma_p)
    d_sigma_u = 0.5 * (model.eps_u**2 - 1.0 / model.sigma_u)
    return d_v_p, d_sigma_p, d_sigma_u


def converged_errors(model: PcModel, u: float) -> PcModel:
    """Set both error units to their closed-form fixed points."""
    return replace(
        model,
        eps_p=(model.phi - model.v_p) / model.sigma_p,
        eps_u=(u - model.g_value(model.phi)) / model.sigma_u,
    )


@dataclass(frozen=True)
class SimStep:
    iteration: int
    phi: float
    eps_p: float
    eps_u: float
    free_energy: float


def simulate(model: PcModel, u: float, step: float, iters: int) -> list[SimStep]:
    """Interleave error-unit and estimate dynamics, recording a trace.

    Uses dphi = eps_u * g'(phi) - eps_p, which is dF/dphi expressed with the
    eps_p = (phi - v_p) / sigma_p convention. Converges to the same optimum as
    ``relax_phi`` with the error units at their fixed points.
    """
    if step <= 0:
        raise DomainError(f"step must be positive, got {step}")
    phi, eps_p, eps_u = model.phi, model.eps_p, model.eps_u
    trace = [SimStep(0, phi, eps_p, eps_u, free_energy(model, u))]
    current = model
    for k in range(1, iters + 1):
        d_eps_p = phi - current.v_p - current.sigma_p * eps_p
        d_eps_u = u - current.g_value(phi) - current.sigma_u * eps_u
        d_phi = eps_u * current.g_prime() - eps_p
        eps_p += step * d_eps_p
        eps_u += step * d_eps_u
        phi += step * d_phi
        if abs(phi) > PHI_LIMIT:
            raise StepSizeError(f"phi diverged past {PHI_LIMIT:g}; reduce the step size")
        current = replace(current, phi=phi, eps_p=eps_p, eps_u=eps_u)
        trace.append(SimStep(k, phi, eps_p, eps_u, free_energy(current, u)))
    return trace
