# tests/test_nls.py
import numpy as np
import pytest

import models.nls as nls
from models.diagnostics import hs_norm, mass, relative_drift
from models.dynamics import SolverConfig, evolve_hydro
from models.errors import ParameterError, ResolutionError, SimulationDivergedError
from models.grid import RealField, ScalarField
from models.initial_data import gaussian_amplitude, neglog_phase
from models.nls import (
    check_resolution,
    evolve_nls,
    kinetic_step,
    lift_hs_bound_terms,
    madelung_lift,
    madelung_project,
    potential_step,
    resolution_floor,
)


@pytest.fixture
def wave(run_grid):
    return ScalarField(run_grid, gaussian_amplitude(run_grid, center=(0.5, 0.0)).astype(complex))


@pytest.fixture
def phase(run_grid):
    return RealField(run_grid, neglog_phase(run_grid))


def test_wave_solver_needs_positive_epsilon(wave):
    with pytest.raises(ParameterError):
        evolve_nls(wave, SolverConfig(epsilon=0.0))
    with pytest.raises(ParameterError):
        kinetic_step(wave, 0.1, 0.0)


def test_mass_is_conserved(wave, short_solver):
    samples = evolve_nls(wave, short_solver)
    assert samples[-1].t == pytest.approx(short_solver.T)
    assert samples[-1].psi is None
    assert relative_drift([mass(s.u) for s in samples]) < 1e-12


def test_lift_and_project_are_inverse(wave, phase):
    lifted = madelung_lift(wave, phase, 0.25)
    np.testing.assert_allclose(np.abs(lifted.values), np.abs(wave.values), atol=1e-15)
    back = madelung_project(lifted, phase, 0.25)
    np.testing.assert_allclose(back.values, wave.values, atol=1e-14)


def test_potential_step_keeps_modulus(wave):
    stepped = potential_step(wave, 0.1, 0.5, lam=-1.0)
    np.testing.assert_allclose(np.abs(stepped.values), np.abs(wave.values), atol=1e-14)
    assert not np.allclose(stepped.values, wave.values)
    assert potential_step(wave, 0.1, 0.5, lam=0.0) is wave


def test_gauge_covariance(wave, short_solver):
    theta = 0.7
    plain = evolve_nls(wave, short_solver)[-1].u.values
    rotated = evolve_nls(ScalarField(wave.grid, np.exp(1j * theta) * wave.values), short_solver)[-1].u.values
    np.testing.assert_allclose(rotated, np.exp(1j * theta) * plain, atol=1e-12)


def test_free_flow_is_one_kinetic_step(wave):
    cfg = SolverConfig(epsilon=0.5, lam=0.0, dt=5e-3, T=0.05, samples=1)
    final = evolve_nls(wave, cfg)[-1]
    np.testing.assert_allclose(final.u.values, kinetic_step(wave, cfg.T, cfg.epsilon).values, atol=1e-12)


def test_phase_tracking_without_forces_stays_zero(wave, run_grid):
    cfg = SolverConfig(epsilon=1.0, lam=0.0, dt=5e-3, T=0.05, samples=2)
    psi0 = RealField(run_grid, np.zeros(run_grid.shape))
    samples = evolve_nls(wave, cfg, psi0=psi0)
    assert all(np.all(s.psi.values == 0.0) for s in samples)


def test_wave_and_hydro_runs_agree(run_grid, short_solver):
    A = ScalarField(run_grid, gaussian_amplitude(run_grid))
    Phi = RealField(run_grid, np.zeros(run_grid.shape))
    hydro = evolve_hydro((A, Phi), short_solver)[-1]
    wave = evolve_nls(madelung_lift(A, Phi, short_solver.epsilon), short_solver, psi0=Phi)[-1]
    lifted = madelung_lift(hydro.a, hydro.phi, short_solver.epsilon)
    diff = np.sqrt(np.sum(np.abs(wave.u.values - lifted.values) ** 2) * run_grid.cell_area)
    assert diff < 1e-3


def test_resolution_floor_and_guard(run_grid, phase):
    assert resolution_floor(run_grid, 1.0) == pytest.approx(8 * run_grid.h / (2 * np.pi))
    with pytest.raises(ResolutionError):
        check_resolution(0.1, phase, max_gradient=1.0)
    assert check_resolution(0.5, phase, max_gradient=1.0) == pytest.approx(resolution_floor(run_grid, 1.0))
    # measured gradient of -log<x> peaks at 1/2
    assert check_resolution(0.5, phase) == pytest.approx(resolution_floor(run_grid, 0.5), rel=1e-2)


def test_lift_bound_terms(wave, phase):
    with pytest.raises(ParameterError):
        lift_hs_bound_terms(wave, phase, 1.5)
    flat = RealField(wave.grid, np.zeros(wave.grid.shape))
    lhs, bracket = lift_hs_bound_terms(wave, flat, 3.0)
    assert lhs == pytest.approx(bracket)
    assert lhs == pytest.approx(hs_norm(wave, 3.0))
    lhs, bracket = lift_hs_bound_terms(wave, phase, 3.0, epsilon=0.5)
    assert 0.0 < lhs <= 50.0 * bracket


def test_kinetic_step_rotates_plane_wave(run_grid):
    X1, _ = run_grid.coords()
    k = 3.0 * np.pi / run_grid.half_width
    u = ScalarField(run_grid, np.exp(1j * k * X1))
    dt, eps = 0.3, 0.5
    stepped = kinetic_step(u, dt, eps)
    np.testing.assert_allclose(stepped.values, np.exp(-0.5j * eps * k * k * dt) * u.values, atol=1e-12)


def test_wave_solver_is_second_order_in_time(wave, run_grid):
    reference = evolve_nls(wave, SolverConfig(epsilon=1.0, lam=1.0, dt=6.25e-4, T=0.2, samples=1))[-1].u.values
    errors = []
    for dt in (0.04, 0.02, 0.01):
        final = evolve_nls(wave, SolverConfig(epsilon=1.0, lam=1.0, dt=dt, T=0.2, samples=1))[-1]
        errors.append(np.sqrt(np.sum(np.abs(final.u.values - reference) ** 2) * run_grid.cell_area))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    np.testing.assert_allclose(orders, 2.0, atol=0.2)


def test_divergence_reports_last_accepted_wave(wave, run_grid, monkeypatch):
    cfg = SolverConfig(epsilon=1.0, lam=1.0, dt=2e-3, T=0.02, samples=10)
    psi0 = RealField(run_grid, np.zeros(run_grid.shape))
    clean = evolve_nls(wave, cfg, psi0=psi0)
    real_kinetic = nls._kinetic_values
    calls = []

    def failing_kinetic(*args):
        calls.append(1)
        out = real_kinetic(*args)
        return np.full_like(out, np.nan) if len(calls) == 5 else out

    monkeypatch.setattr(nls, "_kinetic_values", failing_kinetic)
    with pytest.raises(SimulationDivergedError) as info:
        evolve_nls(wave, cfg, psi0=psi0)
    good = info.value.last_good
    assert good.t == pytest.approx(4 * cfg.step)
    np.testing.assert_array_equal(good.u.values, clean[4].u.values)
    np.testing.assert_array_equal(good.psi.values, clean[4].psi.values)
