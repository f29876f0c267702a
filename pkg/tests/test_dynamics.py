# tests/test_dynamics.py
import numpy as np
import pytest

import models.dynamics as dynamics
from models.diagnostics import curl_residual, mass, relative_drift
from models.dynamics import (
    SolverConfig,
    cfl_limit,
    evolve_hydro,
    hydro_rhs,
    hydro_step,
    initial_state,
    phase_consistency,
    phase_growth,
    reconstruct_phase,
)
from models.errors import ParameterError, SimulationDivergedError, StepRejectedError
from models.grid import RealField, ScalarField, build_grid
from models.initial_data import gaussian_amplitude
from models.nls import kinetic_step


@pytest.fixture
def data(run_grid):
    A = ScalarField(run_grid, gaussian_amplitude(run_grid))
    Phi = RealField(run_grid, np.zeros(run_grid.shape))
    return A, Phi


@pytest.mark.parametrize(
    "kwargs",
    [{"dt": 0.0}, {"dt": -1e-3}, {"epsilon": -0.1}, {"T": -1.0}, {"poisson_path": "sor"}, {"samples": 0}],
)
def test_solver_config_validation(kwargs):
    with pytest.raises(ParameterError):
        SolverConfig(**kwargs)


def test_step_lands_on_final_time():
    cfg = SolverConfig(T=0.3, dt=0.07, samples=10)
    assert cfg.n_steps == 5
    assert cfg.step == pytest.approx(0.06)
    assert cfg.sample_steps() == [0, 1, 2, 3, 4, 5]
    assert SolverConfig(T=0.3, dt=2e-4).n_steps == 1500


def test_zero_horizon_returns_initial_state(data):
    samples = evolve_hydro(data, SolverConfig(T=0.0))
    assert len(samples) == 1
    assert samples[0].t == 0.0


def test_hydro_conserves_mass_and_stays_curl_free(data, short_solver):
    samples = evolve_hydro(data, short_solver)
    assert samples[-1].t == pytest.approx(short_solver.T)
    assert relative_drift([mass(s.a) for s in samples]) < 1e-8
    assert max(curl_residual(s.v) for s in samples[1:]) < 1e-8
    assert phase_consistency(samples[-1]) < 1e-4


def test_free_flow_without_phase_is_pure_dispersion(data):
    A, Phi = data
    cfg = SolverConfig(epsilon=1.0, lam=0.0, dt=5e-3, T=0.05, samples=1)
    final = evolve_hydro(data, cfg)[-1]
    exact = kinetic_step(A, cfg.T, cfg.epsilon)
    np.testing.assert_allclose(final.a.values, exact.values, atol=1e-12)
    assert np.max(np.abs(final.v.components[0])) == 0.0


def test_limit_system_without_potential_keeps_still_data(data):
    cfg = SolverConfig(epsilon=0.0, lam=0.0, dt=5e-3, T=0.05, samples=1)
    final = evolve_hydro(data, cfg)[-1]
    np.testing.assert_array_equal(final.a.values, data[0].values)


def test_positive_lambda_pushes_velocity_outward(data, run_grid):
    # grad P points inward, so -lam grad P points outward for lam > 0
    cfg = SolverConfig(epsilon=0.0, lam=1.0, dt=5e-3, T=0.05, samples=1)
    final = evolve_hydro(data, cfg)[-1]
    v1, v2 = final.v.components
    X1, X2 = run_grid.coords()
    inner = (run_grid.radius() > 0.5) & (run_grid.radius() < 4.0)
    assert np.all((v1 * X1 + v2 * X2)[inner] > 0)


def test_free_gaussian_matches_closed_form(data, run_grid):
    cfg = SolverConfig(epsilon=1.0, lam=0.0, dt=1e-3, T=0.1, samples=1)
    final = evolve_hydro(data, cfg)[-1]
    z = 1.0 + 1j * cfg.epsilon * cfg.T
    exact = np.exp(-run_grid.radius() ** 2 / (2.0 * z)) / (np.sqrt(np.pi) * z)
    err = np.sqrt(np.sum(np.abs(final.a.values - exact) ** 2) * run_grid.cell_area)
    assert err < 1e-6


def test_step_backwards_undoes_step(data, short_solver):
    state = initial_state(*data)
    forward = hydro_step(state, short_solver, dt=1e-3)
    back = hydro_step(forward, short_solver, dt=-1e-3)
    assert back.t == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(back.a.values, state.a.values, atol=1e-9)


def test_cfl_violation_is_rejected(run_grid):
    X1, _ = run_grid.coords()
    A = ScalarField(run_grid, gaussian_amplitude(run_grid))
    Phi = RealField(run_grid, 100.0 * np.cos(np.pi * X1 / run_grid.half_width))
    state = initial_state(A, Phi)
    speed, limit = cfl_limit(state.v)
    assert limit < 1e-2
    with pytest.raises(StepRejectedError) as info:
        hydro_step(state, SolverConfig(), dt=1e-2)
    assert info.value.dt_limit == pytest.approx(limit)
    assert info.value.max_speed == pytest.approx(speed)


def test_cfl_limit_of_still_fluid(data):
    speed, limit = cfl_limit(initial_state(*data).v)
    assert speed == 0.0
    assert limit == np.inf


def test_rhs_of_still_free_data_is_dispersion(data, run_grid):
    A, _ = data
    da, dv = hydro_rhs(initial_state(*data), SolverConfig(epsilon=1.0, lam=0.0))
    r2 = run_grid.radius() ** 2
    # Delta of the Gaussian amplitude is (r^2 - 2) A
    np.testing.assert_allclose(da.values, 0.5j * (r2 - 2.0) * A.values, atol=1e-10)
    assert np.all(dv.components[0] == 0.0)


def test_reconstructed_phase_matches_stepped_phase(data):
    cfg = SolverConfig(epsilon=1.0, lam=1.0, dt=2e-3, T=0.02, samples=10)
    samples = evolve_hydro(data, cfg)
    rebuilt = reconstruct_phase(samples, cfg)
    assert len(rebuilt) == len(samples)
    for state, phi in zip(samples, rebuilt):
        np.testing.assert_allclose(phi.values, state.phi.values, atol=1e-12)
    assert reconstruct_phase([], cfg) == []


def test_phase_growth_starts_at_zero(data, run_grid):
    state = initial_state(*data)
    assert phase_growth(state, data[1], 0.8 * run_grid.half_width) == 0.0


def test_on_step_sees_every_step(data, short_solver):
    seen = []
    evolve_hydro(data, short_solver, on_step=lambda s: seen.append(s.t))
    assert len(seen) == short_solver.n_steps + 1


@pytest.mark.slow
def test_standard_run_mass_and_phase_growth():
    grid = build_grid(12.0, 256)
    A = ScalarField(grid, gaussian_amplitude(grid))
    Phi = RealField(grid, np.zeros(grid.shape))
    cfg = SolverConfig(epsilon=1.0, lam=1.0, dt=2e-4, T=0.3, samples=3)
    samples = evolve_hydro((A, Phi), cfg)
    assert relative_drift([mass(s.a) for s in samples]) < 1e-8
    bound = cfg.T * cfg.lam * mass(A) / (2.0 * np.pi)
    assert phase_growth(samples[-1], Phi, 0.8 * grid.half_width) <= 1.15 * bound


def _l2(values, grid):
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * grid.cell_area))


def test_still_limit_data_accelerates_like_enclosed_mass():
    grid = build_grid(8.0, 128)
    A = ScalarField(grid, gaussian_amplitude(grid))
    Phi = RealField(grid, np.zeros(grid.shape))
    _, dv = hydro_rhs(initial_state(A, Phi), SolverConfig(epsilon=0.0, lam=1.0))
    X1, X2 = grid.coords()
    r = grid.radius()
    band = (r >= 0.5) & (r <= 4.0)
    # |A|^2 = exp(-r^2)/pi encloses 1 - exp(-r^2) inside radius r
    radial = (1.0 - np.exp(-r[band] ** 2)) / (2.0 * np.pi * r[band])
    np.testing.assert_allclose(dv.components[0][band], radial * X1[band] / r[band], atol=1e-3)
    np.testing.assert_allclose(dv.components[1][band], radial * X2[band] / r[band], atol=1e-3)


def test_hydro_solver_is_fourth_order_in_time(data, run_grid):
    cfg = SolverConfig(epsilon=1.0, lam=1.0, dt=2.5e-3, T=0.2, samples=1)
    reference = evolve_hydro(data, cfg)[-1].a.values
    errors = []
    for dt in (0.04, 0.02, 0.01):
        final = evolve_hydro(data, SolverConfig(epsilon=1.0, lam=1.0, dt=dt, T=0.2, samples=1))[-1]
        errors.append(_l2(final.a.values - reference, run_grid))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    np.testing.assert_allclose(orders, 4.0, atol=0.3)


def test_hydro_converges_to_limit_as_epsilon_halves(data, run_grid):
    limit = evolve_hydro(data, SolverConfig(epsilon=0.0, lam=1.0, dt=2e-3, T=0.1, samples=1))[-1]
    gaps = []
    for eps in (0.2, 0.1, 0.05, 0.025):
        final = evolve_hydro(data, SolverConfig(epsilon=eps, lam=1.0, dt=2e-3, T=0.1, samples=1))[-1]
        gaps.append(_l2(final.a.values - limit.a.values, run_grid))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    np.testing.assert_allclose(np.array(gaps[:-1]) / np.array(gaps[1:]), 2.0, atol=0.2)


def test_divergence_reports_last_accepted_state(data, short_solver, monkeypatch):
    seen = []
    evolve_hydro(data, short_solver, on_step=seen.append)
    real_step = dynamics._lawson_rk4
    calls = []

    def failing_step(*args):
        calls.append(1)
        a, v1, v2 = real_step(*args)
        if len(calls) == 4:
            a = np.full_like(a, np.nan)
        return a, v1, v2

    monkeypatch.setattr(dynamics, "_lawson_rk4", failing_step)
    with pytest.raises(SimulationDivergedError) as info:
        evolve_hydro(data, short_solver)
    good = info.value.last_good
    assert good.t == pytest.approx(3 * short_solver.step)
    np.testing.assert_array_equal(good.a.values, seen[3].a.values)
    np.testing.assert_array_equal(good.phi.values, seen[3].phi.values)
