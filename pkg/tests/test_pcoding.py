import numpy as np
import pytest

from futureguided.errors import DomainError, StepSizeError
from futureguided.pcoding import (
    PcModel,
    converged_errors,
    error_dynamics,
    free_energy,
    grad_phi,
    learn_parameters,
    relax_phi,
    simulate,
)

BASE = PcModel(v_p=1.0, sigma_p=1.0, sigma_u=1.0, phi=1.5)


def random_models(n, seed=0, identity_only=False):
    rng = np.random.default_rng(seed)
    models = []
    for _ in range(n):
        g = "identity" if identity_only or rng.random() < 0.5 else "scalar"
        models.append(
            (
                PcModel(
                    v_p=float(rng.normal(scale=2)),
                    sigma_p=float(rng.uniform(0.3, 3.0)),
                    sigma_u=float(rng.uniform(0.3, 3.0)),
                    phi=float(rng.normal(scale=2)),
                    g=g,
                    gain=float(rng.uniform(0.5, 2.0)),
                ),
                float(rng.normal(scale=2)),
            )
        )
    return models


def optimum(model, u):
    """Precision-weighted mean, the argmax of F for the identity map."""
    return (model.sigma_u * model.v_p + model.sigma_p * u) / (
        model.sigma_p + model.sigma_u
    )


class TestFreeEnergy:
    def test_zero_at_perfect_match_unit_variances(self):
        model = PcModel(v_p=1.0, sigma_p=1.0, sigma_u=1.0, phi=1.0)
        assert free_energy(model, u=1.0) == 0.0

    def test_hand_value(self):
        # both errors 0.5, unit variances: -(0.25 + 0.25)/2
        assert free_energy(BASE, u=2.0) == pytest.approx(-0.25, abs=1e-12)

    def test_decreases_away_from_optimum(self):
        u = 2.0
        best = optimum(BASE, u)
        at_best = free_energy(PcModel(1.0, 1.0, 1.0, phi=best), u)
        for offset in (0.1, -0.1, 1.0, -1.0):
            assert free_energy(PcModel(1.0, 1.0, 1.0, phi=best + offset), u) < at_best

    def test_variances_must_be_positive(self):
        with pytest.raises(DomainError):
            PcModel(v_p=0.0, sigma_p=0.0, sigma_u=1.0, phi=0.0)


class TestGradPhi:
    def test_zero_at_optimum(self):
        assert grad_phi(BASE, u=2.0) == pytest.approx(0.0, abs=1e-12)

    def test_matches_finite_differences_100_models(self):
        from dataclasses import replace

        for model, u in random_models(100, seed=1):
            eps = 1e-6
            up = free_energy(replace(model, phi=model.phi + eps), u)
            down = free_energy(replace(model, phi=model.phi - eps), u)
            fd = (up - down) / (2 * eps)
            grad = grad_phi(model, u)
            assert abs(fd - grad) / max(abs(fd), abs(grad), 1e-8) < 1e-6

    def test_flat_prior_limit(self):
        model = PcModel(v_p=5.0, sigma_p=1e12, sigma_u=1.0, phi=0.3, g="scalar", gain=2.0)
        u = 1.7
        likelihood_only = (u - 2.0 * 0.3) / 1.0 * 2.0
        assert grad_phi(model, u) == pytest.approx(likelihood_only, abs=1e-9)


class TestRelaxPhi:
    def test_converges_to_precision_weighted_mean(self):
        start = PcModel(v_p=1.0, sigma_p=1.0, sigma_u=1.0, phi=0.0)
        relaxed = relax_phi(start, u=2.0, step=0.1)
        assert relaxed.phi == pytest.approx(1.5, abs=1e-6)

    def test_fixed_point_unchanged(self):
        relaxed = relax_phi(BASE, u=2.0, step=0.1)
        assert relaxed.phi == BASE.phi

    def test_initialization_independent(self):
        results = [
            relax_phi(PcModel(1.0, 1.0, 1.0, phi=phi0), u=2.0, step=0.05).phi
            for phi0 in (-10.0, 0.0, 7.5)
        ]
        assert max(results) - min(results) < 1e-8

    def test_divergence_raises_step_error(self):
        with pytest.raises(StepSizeError):
            relax_phi(PcModel(0.0, 0.1, 0.1, phi=5.0), u=-5.0, step=1e3, iters=10_000)

    def test_step_must_be_positive(self):
        with pytest.raises(DomainError):
            relax_phi(BASE, u=2.0, step=0.0)


class TestErrorDynamics:
    def test_fixed_point_values(self):
        settled = error_dynamics(BASE, u=2.0, step=0.05, iters=5000)
        assert settled.eps_p == pytest.approx(0.5, abs=1e-8)
        assert settled.eps_u == pytest.approx(0.5, abs=1e-8)

    def test_zero_drive_decays_to_zero(self):
        model = PcModel(v_p=1.0, sigma_p=1.0, sigma_u=1.0, phi=1.0, eps_p=3.0, eps_u=-2.0)
        settled = error_dynamics(model, u=1.0, step=0.05, iters=5000)
        assert settled.eps_p == pytest.approx(0.0, abs=1e-8)
        assert settled.eps_u == pytest.approx(0.0, abs=1e-8)

    def test_exponential_convergence_rate(self):
        # Linear dynamics: distance to the fixed point scales by (1 - step*sigma)
        # per Euler step; check against that closed form after k steps.
        model = PcModel(v_p=0.0, sigma_p=2.0, sigma_u=0.5, phi=1.0)
        u, step, k = 3.0, 0.01, 137
        stepped = error_dynamics(model, u=u, step=step, iters=k)
        fixed = converged_errors(model, u)
        for eps0, eps_k, fixed_val, sigma in [
            (model.eps_p, stepped.eps_p, fixed.eps_p, model.sigma_p),
            (model.eps_u, stepped.eps_u, fixed.eps_u, model.sigma_u),
        ]:
            expected = fixed_val + (eps0 - fixed_val) * (1.0 - step * sigma) ** k
            assert eps_k == pytest.approx(expected, abs=1e-12)

    def test_instability_warning(self):
        with pytest.warns(RuntimeWarning):
            error_dynamics(BASE, u=2.0, step=2.5, iters=1)


class TestLearnParameters:
    def test_plug_in_value(self):
        model = PcModel(v_p=1.0, sigma_p=1.0, sigma_u=1.0, phi=1.5, eps_p=0.5, eps_u=0.5)
        _, d_sigma_p, _ = learn_parameters(model, u=2.0)
        assert d_sigma_p == pytest.approx(-0.375, abs=1e-12)

    def test_stationary_when_variance_matches_error(self):
        model = PcModel(v_p=0.0, sigma_p=4.0, sigma_u=1.0, phi=2.0, eps_p=0.5, eps_u=0.0)
        # eps_p^2 == 1/sigma_p
        _, d_sigma_p, _ = learn_parameters(model, u=2.0)
        assert d_sigma_p == pytest.approx(0.0, abs=1e-12)

    def test_matches_finite_differences_100_models(self):
        from dataclasses import replace

        eps = 1e-6
        for model, u in random_models(100, seed=2):
            settled = converged_errors(model, u)
            d_v_p, d_sigma_p, d_sigma_u = learn_parameters(settled, u)
            for name, grad in [("v_p", d_v_p), ("sigma_p", d_sigma_p), ("sigma_u", d_sigma_u)]:
                up = free_energy(replace(model, **{name: getattr(model, name) + eps}), u)
                down = free_energy(replace(model, **{name: getattr(model, name) - eps}), u)
                fd = (up - down) / (2 * eps)
                assert abs(fd - grad) / max(abs(fd), abs(grad), 1e-8) < 1e-6, name


class TestSimulate:
    def test_interleaved_dynamics_reach_optimum(self):
        model = PcModel(v_p=1.0, sigma_p=1.0, sigma_u=1.0, phi=0.0)
        trace = simulate(model, u=2.0, step=0.05, iters=4000)
        assert trace[-1].phi == pytest.approx(1.5, abs=1e-4)
        assert trace[-1].eps_p == pytest.approx(0.5, abs=1e-4)
        assert trace[-1].eps_u == pytest.approx(0.5, abs=1e-4)

    def test_trace_shape(self):
        trace = simulate(BASE, u=2.0, step=0.05, iters=10)
        assert len(trace) == 11
        assert trace[0].iteration == 0 and trace[-1].iteration == 10
