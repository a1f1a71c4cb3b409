from __future__ import annotations

import asyncio
import time

import numpy as np
import pytest

from src.application.diagnostics import (
    conformal_compare,
    contact_residuals,
    criticality_profile,
    criticality_residual,
    discrete_action,
    ensemble_norm_series,
    ensemble_norms,
    ensemble_operator_norm,
    mechanical_energy,
    pullback_residual,
    recomputed_conformal_factors,
    self_convergence,
    step_jacobian,
)
from src.application.discretizations import AdditiveNoiseLagrangian, KeplerLagrangian, MultiplicativeNoiseLagrangian
from src.application.integrator import integrate
from src.application.models import QuadraticPotential
from src.application.noise import deterministic_path, generate_path, refine
from src.application.orchestrator import EnsembleOrchestrator
from src.application.registry import get_model_spec
from src.domain.entities import ContactState
from src.domain.errors import ConfigError, DimensionMismatchError, InvalidStateError

from conftest import H, make_state

ADDITIVE = "damped-oscillator-additive"


def _run(name, scheme, initial, path, params=None):
    spec = get_model_spec(name)
    model = spec.model(params)
    stepper = spec.stepper(model, scheme)
    return model, stepper, integrate(stepper, initial, path)


class TestStepJacobian:

    def test_identity_at_zero_step(self, reference_state):
        _, stepper, _ = _run(ADDITIVE, "em", reference_state, deterministic_path(1, H))
        J = step_jacobian(stepper, reference_state, 0.0, [0.0]).J
        np.testing.assert_allclose(J, np.eye(3), atol=1e-9)

    def test_insensitive_to_fd_step(self, reference_state):
        _, stepper, _ = _run(ADDITIVE, "contact", reference_state, deterministic_path(1, H))
        small = step_jacobian(stepper, reference_state, H, [0.1], fd_step=1e-6).J
        large = step_jacobian(stepper, reference_state, H, [0.1], fd_step=2e-6).J
        assert np.max(np.abs(small - large)) <= 1e-6

    def test_analytic_needs_support(self, reference_state):
        _, stepper, _ = _run(ADDITIVE, "em", reference_state, deterministic_path(1, H))
        with pytest.raises(ConfigError):
            step_jacobian(stepper, reference_state, H, [0.0], method="analytic")
        with pytest.raises(ConfigError):
            step_jacobian(stepper, reference_state, H, [0.0], method="complex-step")

    def test_em_pullback_defect(self, reference_state):
        # J^T eta(x1) - (1 - alpha h) eta(x0) = (0, h^2 (q + alpha p), 0)
        _, stepper, _ = _run(ADDITIVE, "em", reference_state, deterministic_path(1, H))
        after = stepper.step(reference_state, H, [0.0]).next
        J = step_jacobian(stepper, reference_state, H, [0.0]).J
        r, lam = pullback_residual(J, reference_state, after, None)
        assert lam == pytest.approx(0.99, abs=1e-9)
        assert r == pytest.approx(0.01 * 0.725, rel=1e-6)


class TestContactResiduals:

    def test_additive_contact_scheme(self, reference_state):
        model, stepper, trajectory = _run(ADDITIVE, "contact", reference_state, generate_path(42, 1, 200, H))
        report = contact_residuals(stepper, trajectory, H, model=model)
        assert report.residuals.shape == (200,)
        assert report.max_residual <= 1e-6
        assert contact_residuals(stepper, trajectory, H, method="analytic").max_residual <= 1e-10
        np.testing.assert_allclose(report.lambdas, 0.99, atol=1e-15)
        np.testing.assert_allclose(report.lambda_ref, np.exp(-0.01), rtol=1e-12)

    def test_euler_maruyama_is_not_contact(self, reference_state):
        path = generate_path(42, 1, 200, H)
        _, contact_stepper, contact = _run(ADDITIVE, "contact", reference_state, path)
        _, em_stepper, em = _run(ADDITIVE, "em", reference_state, path)
        contact_max = contact_residuals(contact_stepper, contact, H).max_residual
        em_max = contact_residuals(em_stepper, em, H).max_residual
        assert em_max >= 1e-3
        assert em_max >= 1e3 * contact_max

    def test_undamped_noise_free(self, reference_state):
        _, stepper, trajectory = _run(
            ADDITIVE, "contact", reference_state, deterministic_path(100, H), {"alpha": 0.0, "epsilon": 0.0}
        )
        assert contact_residuals(stepper, trajectory, H).max_residual <= 1e-9

    def test_em_defect_is_second_order(self, reference_state):
        coarse_path = generate_path(5, 1, 200, H)
        fine_path = refine(coarse_path)
        _, stepper, coarse = _run(ADDITIVE, "em", reference_state, coarse_path)
        _, _, fine = _run(ADDITIVE, "em", reference_state, fine_path)
        ratio = contact_residuals(stepper, coarse, H).max_residual / contact_residuals(stepper, fine, H / 2).max_residual
        assert 3.0 <= ratio <= 5.0

    def test_empty_trajectory(self, reference_state):
        _, stepper, trajectory = _run(ADDITIVE, "contact", reference_state, deterministic_path(0, H))
        report = contact_residuals(stepper, trajectory, H)
        assert report.max_residual == 0.0
        assert report.residuals.size == 0

    @pytest.mark.slow
    @pytest.mark.parametrize("name,initial,steps", [
        ("damped-oscillator-additive", (0.75, -0.25, 0.08), 200),
        ("damped-multiplicative", (0.75, -0.25, 0.08), 200),
        ("kepler-drag", (5.0, 4.0, 0.08), 2000),
    ])
    def test_contact_schemes_over_many_seeds(self, name, initial, steps):
        for seed in range(10):
            _, stepper, trajectory = _run(name, "contact", make_state(*initial), generate_path(seed, 1, steps, H))
            assert trajectory.is_complete
            assert contact_residuals(stepper, trajectory, H).max_residual <= 1e-6


class TestConformalFactors:

    def test_additive_against_references(self, reference_state):
        model, _, trajectory = _run(ADDITIVE, "contact", reference_state, generate_path(1, 1, 50, H))
        continuous = conformal_compare(trajectory, model, H)
        np.testing.assert_allclose(continuous.reference, np.exp(-0.01), rtol=1e-14)
        np.testing.assert_allclose(continuous.abs_diff, 4.9834e-5, rtol=1e-3)
        np.testing.assert_allclose(continuous.nominal, np.exp(-0.01), rtol=1e-14)
        discrete = conformal_compare(trajectory, model, H, mode="discrete", discretization=AdditiveNoiseLagrangian(model))
        np.testing.assert_allclose(discrete.reference, np.exp(-0.01), rtol=1e-14)

    def test_kepler_is_exponential_to_third_order(self, escaping_state):
        model, _, trajectory = _run("kepler-drag", "contact", escaping_state, generate_path(2, 1, 20, H))
        assert np.max(conformal_compare(trajectory, model, H).abs_diff) < 1e-9
        discrete = conformal_compare(trajectory, model, H, mode="discrete", discretization=KeplerLagrangian(model))
        assert np.max(discrete.abs_diff) < 1e-9

    def test_mode_errors(self, reference_state):
        model, _, trajectory = _run(ADDITIVE, "contact", reference_state, deterministic_path(3, H))
        with pytest.raises(ConfigError):
            conformal_compare(trajectory, model, H, mode="discrete")
        with pytest.raises(ConfigError):
            conformal_compare(trajectory, model, H, mode="midpoint")

    def test_recorded_factors_match_recomputation(self, reference_state):
        model, _, trajectory = _run("damped-multiplicative", "contact", reference_state, generate_path(6, 1, 200, H))
        recomputed = recomputed_conformal_factors(MultiplicativeNoiseLagrangian(model), trajectory, H)
        assert np.max(np.abs(trajectory.lambdas - recomputed)) <= 1e-14


class TestCriticality:

    def test_contact_trajectory_is_critical(self, reference_state):
        model, _, trajectory = _run(ADDITIVE, "contact", reference_state, generate_path(42, 1, 20, H))
        profile = criticality_profile(AdditiveNoiseLagrangian(model), trajectory, H)
        assert profile.shape == (19,)
        assert np.max(profile) <= 1e-5

    def test_em_trajectory_is_not_critical(self, reference_state):
        model, _, trajectory = _run(ADDITIVE, "em", reference_state, generate_path(42, 1, 20, H))
        assert np.max(criticality_profile(AdditiveNoiseLagrangian(model), trajectory, H)) >= 1e-3

    def test_two_step_extremum(self, reference_state):
        model, _, trajectory = _run(ADDITIVE, "contact", reference_state, generate_path(9, 1, 2, H))
        Ld = AdditiveNoiseLagrangian(model)
        q = trajectory.q[:, 0]
        grid = np.linspace(q[1] - 0.01, q[1] + 0.01, 10_001)
        finals = np.array([
            discrete_action(Ld, [q[0], x, q[2]], reference_state.s, trajectory.increments, H)[-1] for x in grid
        ])
        best = int(np.argmin(finals))
        assert 0 < best < grid.size - 1
        assert abs(grid[best] - q[1]) <= grid[1] - grid[0]

    def test_action_recursion_reproduces_trajectory(self, reference_state):
        model, _, trajectory = _run(ADDITIVE, "contact", reference_state, generate_path(3, 1, 30, H))
        s = discrete_action(AdditiveNoiseLagrangian(model), trajectory.q, reference_state.s, trajectory.increments, H)
        np.testing.assert_allclose(s, trajectory.s, atol=1e-12)

    @pytest.mark.parametrize("j", [0, 20])
    def test_index_must_be_interior(self, reference_state, j):
        model, _, trajectory = _run(ADDITIVE, "contact", reference_state, generate_path(42, 1, 20, H))
        with pytest.raises(IndexError):
            criticality_residual(AdditiveNoiseLagrangian(model), trajectory, H, j)


class TestSelfConvergence:

    def test_single_level(self, reference_state):
        _, stepper, _ = _run(ADDITIVE, "contact", reference_state, deterministic_path(1, H))
        table = self_convergence(stepper, reference_state, 0, H, 20, levels=1, n_paths=2)
        np.testing.assert_array_equal(table.strong_error, [0.0])
        assert np.isnan(table.slope)
        assert table.samples == 2

    def test_deterministic_order(self, reference_state):
        _, stepper, _ = _run(ADDITIVE, "contact", reference_state, deterministic_path(1, H))
        table = self_convergence(stepper, reference_state, 0, H, 200, levels=4, n_paths=1, m=0)
        np.testing.assert_allclose(table.h, [0.1, 0.05, 0.025, 0.0125])
        assert table.strong_error[-1] == 0.0
        assert table.slope >= 1.9

    def test_rejects_bad_arguments(self, reference_state):
        _, stepper, _ = _run(ADDITIVE, "contact", reference_state, deterministic_path(1, H))
        with pytest.raises(ConfigError):
            self_convergence(stepper, reference_state, 0, H, 20, levels=0, n_paths=1)
        with pytest.raises(ConfigError):
            self_convergence(stepper, reference_state, 0, H, 20, levels=2, n_paths=0)

    def test_failed_seeds_are_excluded(self, reference_state):
        spec = get_model_spec("kepler-drag")
        stepper = spec.stepper(spec.model(), "contact")
        table = self_convergence(stepper, reference_state, 0, H, 50, levels=2, n_paths=2, m=0)
        assert (table.samples, table.failures) == (0, 2)
        assert np.all(np.isnan(table.strong_error))

    @pytest.mark.slow
    @pytest.mark.parametrize("name", [ADDITIVE, "damped-multiplicative"])
    def test_stochastic_errors_decrease(self, name, reference_state):
        _, stepper, _ = _run(name, "contact", reference_state, deterministic_path(1, H))
        table = self_convergence(stepper, reference_state, 0, H, 200, levels=4, n_paths=50)
        assert table.failures == 0
        assert np.all(np.diff(table.strong_error) < 0.0)


class TestEnsembleNorms:

    def test_single_state(self):
        stats = ensemble_norms([make_state(3.0, 4.0, 0.0)])
        assert (stats.sample_count, stats.norm, stats.q_norm, stats.p_norm, stats.s_norm) == (1, 5.0, 3.0, 4.0, 0.0)

    def test_duplicates_do_not_change_norm(self):
        x = make_state(1.0, 2.0, 2.0)
        assert ensemble_norms([x, x]).norm == pytest.approx(ensemble_norms([x]).norm)

    def test_mean_square(self):
        stats = ensemble_norms([make_state(1.0, 0.0, 0.0), make_state(0.0, 1.0, 0.0)])
        assert stats.norm == pytest.approx(1.0)
        assert stats.q_norm == pytest.approx(np.sqrt(0.5))

    def test_rejects_empty_and_mixed(self):
        with pytest.raises(InvalidStateError):
            ensemble_norms([])
        with pytest.raises(DimensionMismatchError):
            ensemble_norms([make_state(0.0, 0.0, 0.0), ContactState(q=[0.0, 0.0], p=[0.0, 0.0], s=0.0)])

    def test_series_over_trajectories(self, reference_state):
        trajectories = [_run(ADDITIVE, "contact", reference_state, generate_path(seed, 1, 10, H))[2] for seed in range(3)]
        series = ensemble_norm_series(trajectories)
        assert len(series) == 11
        assert series[0].norm == pytest.approx(np.linalg.norm(reference_state.as_vector()))

    def test_operator_norm(self):
        assert ensemble_operator_norm([np.diag([3.0, 1.0])]) == pytest.approx(3.0)
        assert ensemble_operator_norm([np.eye(2), 2.0 * np.eye(2)]) == pytest.approx(np.sqrt(2.5))
        with pytest.raises(InvalidStateError):
            ensemble_operator_norm([])

    def test_mechanical_energy_decays(self, reference_state):
        _, _, trajectory = _run(ADDITIVE, "contact", reference_state, deterministic_path(200, H))
        energy = mechanical_energy(trajectory, QuadraticPotential())
        assert energy[0] == pytest.approx(0.3125)
        assert energy[-1] < 0.5 * energy[0]


class TestOrchestrator:

    def test_batches_are_sorted_by_seed(self):
        def task(seed):
            time.sleep(0.001 * (10 - seed % 10))
            return seed * seed

        async def gather():
            return [batch async for batch in EnsembleOrchestrator(task, max_concurrent=2).run(list(range(20)))]

        batches = asyncio.run(gather())
        assert [len(b) for b in batches] == [8, 8, 4]
        for batch in batches:
            assert [seed for seed, _ in batch] == sorted(seed for seed, _ in batch)
        assert asyncio.run(EnsembleOrchestrator(task).collect([3, 1, 2])) == {1: 1, 2: 4, 3: 9}

    def test_rejects_zero_concurrency(self):
        with pytest.raises(ValueError):
            EnsembleOrchestrator(lambda seed: seed, max_concurrent=0)
