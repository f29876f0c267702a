# models/dynamics.py
"""
Time integration of the hydrodynamic form of the semiclassical Schrodinger-Poisson system

    da/dt = -v.grad a - (1/2) a div v + i (eps/2) Delta a
    dv/dt = -grad( |v|^2 / 2 + lam P ),          -Delta P = |a|^2,
    dphi/dt = -( |v|^2 / 2 + lam P ),

for any eps >= 0 (eps = 0 is the limit system). The velocity is advanced as the gradient
of the phase integrand, which equals -(v.grad)v - lam grad P for curl-free v and keeps v
an exact discrete gradient.

Steps are Lawson RK4: the dispersive part of the amplitude equation is integrated exactly
by the Fourier factor exp(-i eps |xi|^2 t / 2); only the advective CFL limits dt.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from models.diagnostics import curl_residual, mass
from models.errors import ParameterError, SimulationDivergedError, StepRejectedError
from models.grid import (
    GridSpec,
    RealField,
    ScalarField,
    VectorField2,
    dealias_values,
    div_values,
    fft2,
    frequency_squared,
    grad_values,
    ifft2,
    laplacian_values,
    log_bracket,
    sample_circle,
)
from models.poisson import POISSON_PATHS, potential_values, tapered_potential_values

__all__ = [
    "HydroState",
    "SolverConfig",
    "hydro_rhs",
    "hydro_step",
    "evolve_hydro",
    "reconstruct_phase",
    "phase_integrand",
    "phase_consistency",
    "phase_growth",
    "initial_state",
    "cfl_limit",
]

logger = logging.getLogger(__name__)

CFL_NUMBER = 0.5


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1.0
    lam: float = 1.0
    dt: float = 2e-4
    T: float = 0.3
    dealias: bool = True
    poisson_path: str = "fft"
    samples: int = 10

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.dt > 0:
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if not self.T >= 0:
            raise ParameterError(f"T must be >= 0, got {self.T}")
        if self.poisson_path not in POISSON_PATHS:
            raise ParameterError(f"poisson_path must be one of {POISSON_PATHS}, got {self.poisson_path!r}")
        if int(self.samples) < 1:
            raise ParameterError(f"samples must be >= 1, got {self.samples}")

    @property
    def n_steps(self) -> int:
        if self.T == 0:
            return 0
        return max(1, math.ceil(self.T / self.dt - 1e-9))

    @property
    def step(self) -> float:
        """Uniform step that lands exactly on T."""
        n = self.n_steps
        return self.T / n if n else self.dt

    def sample_steps(self) -> List[int]:
        n = self.n_steps
        k = min(int(self.samples), n) if n else 0
        if k == 0:
            return [0]
        return sorted({int(round(i * n / k)) for i in range(k + 1)})


@dataclass(frozen=True)
class HydroState:
    t: float
    a: ScalarField
    v: VectorField2
    phi: RealField

    @property
    def grid(self) -> GridSpec:
        return self.a.grid


# -----------------------------
# Right-hand side (array level)
# -----------------------------
@dataclass
class _Stage:
    da: np.ndarray
    dv1: np.ndarray
    dv2: np.ndarray
    q: np.ndarray = field(repr=False)


def _potential(rho: np.ndarray, grid: GridSpec, cfg: SolverConfig) -> np.ndarray:
    P = potential_values(rho, grid, cfg.poisson_path)
    return tapered_potential_values(P, rho, grid)


def _phase_integrand(v1, v2, rho, grid, cfg) -> np.ndarray:
    kinetic = 0.5 * (v1 * v1 + v2 * v2)
    if cfg.dealias:
        kinetic = dealias_values(kinetic, grid)
    if cfg.lam == 0:
        return kinetic
    return kinetic + cfg.lam * _potential(rho, grid, cfg)


def _stage(a, v1, v2, grid: GridSpec, cfg: SolverConfig) -> _Stage:
    """Everything except the dispersive term; q is the phase integrand at this state."""
    a1, a2 = grad_values(a, grid)
    transport = -(v1 * a1 + v2 * a2) - 0.5 * a * div_values(v1, v2, grid)
    if cfg.dealias:
        transport = dealias_values(transport, grid)
    q = _phase_integrand(v1, v2, np.abs(a) ** 2, grid, cfg)
    g1, g2 = grad_values(q, grid)
    return _Stage(transport, -g1, -g2, q)


def _dispersion(grid: GridSpec, epsilon: float, tau: float) -> np.ndarray:
    return np.exp(-0.5j * epsilon * frequency_squared(grid) * tau)


def _propagate(values: np.ndarray, factor: Optional[np.ndarray]) -> np.ndarray:
    if factor is None:
        return values
    return ifft2(factor * fft2(values))


def _lawson_rk4(a, v1, v2, grid, cfg, dt, k1: _Stage) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if cfg.epsilon > 0:
        half = _dispersion(grid, cfg.epsilon, 0.5 * dt)
        full = _dispersion(grid, cfg.epsilon, dt)
    else:
        half = full = None

    a_half = _propagate(a, half)
    k1_half = _propagate(k1.da, half)

    k2 = _stage(a_half + 0.5 * dt * k1_half, v1 + 0.5 * dt * k1.dv1, v2 + 0.5 * dt * k1.dv2, grid, cfg)
    k3 = _stage(a_half + 0.5 * dt * k2.da, v1 + 0.5 * dt * k2.dv1, v2 + 0.5 * dt * k2.dv2, grid, cfg)
    k4 = _stage(
        _propagate(a, full) + dt * _propagate(k3.da, half),
        v1 + dt * k3.dv1,
        v2 + dt * k3.dv2,
        grid,
        cfg,
    )

    a_new = _propagate(a, full) + (dt / 6.0) * (
        _propagate(k1.da, full) + 2.0 * _propagate(k2.da + k3.da, half) + k4.da
    )
    v1_new = v1 + (dt / 6.0) * (k1.dv1 + 2.0 * k2.dv1 + 2.0 * k3.dv1 + k4.dv1)
    v2_new = v2 + (dt / 6.0) * (k1.dv2 + 2.0 * k2.dv2 + 2.0 * k3.dv2 + k4.dv2)
    return a_new, v1_new, v2_new


def cfl_limit(v: VectorField2) -> Tuple[float, float]:
    """(max|v|, admissible dt) under dt <= 0.5 h / max|v|."""
    v1, v2 = v.components
    speed = float(np.max(np.hypot(v1, v2)))
    limit = math.inf if speed == 0 else CFL_NUMBER * v.grid.h / speed
    return speed, limit


def _check_cfl(v1, v2, grid: GridSpec, dt: float) -> None:
    speed = float(np.max(np.hypot(v1, v2)))
    if speed == 0:
        return
    limit = CFL_NUMBER * grid.h / speed
    if abs(dt) > limit:
        raise StepRejectedError(max_speed=speed, dt=abs(dt), dt_limit=limit)


# -----------------------------
# Public operations
# -----------------------------
def hydro_rhs(state: HydroState, cfg: SolverConfig) -> Tuple[ScalarField, VectorField2]:
    """(da/dt, dv/dt) at the given state, dispersive term included."""
    grid = state.grid
    a = state.a.values
    v1, v2 = state.v.components
    k = _stage(a, v1, v2, grid, cfg)
    da = k.da
    if cfg.epsilon > 0:
        da = da + 0.5j * cfg.epsilon * laplacian_values(a, grid)
    return ScalarField(grid, da), VectorField2(grid, (k.dv1, k.dv2))


def phase_integrand(state: HydroState, cfg: SolverConfig) -> RealField:
    """|v|^2/2 + lam P at the state (P with its far field tapered at the box edge)."""
    v1, v2 = state.v.components
    q = _phase_integrand(v1, v2, np.abs(state.a.values) ** 2, state.grid, cfg)
    return RealField(state.grid, q)


def hydro_step(state: HydroState, cfg: SolverConfig, dt: Optional[float] = None) -> HydroState:
    """
    One Lawson RK4 step of size dt (cfg.step by default; negative dt steps backwards).

    The phase is advanced with the trapezoid rule on the phase integrand at both ends.
    Raises StepRejectedError when |dt| exceeds the advective CFL limit.
    """
    grid = state.grid
    dt = cfg.step if dt is None else float(dt)
    a = state.a.values
    v1, v2 = state.v.components
    _check_cfl(v1, v2, grid, dt)
    k1 = _stage(a, v1, v2, grid, cfg)
    a_new, v1_new, v2_new = _lawson_rk4(a, v1, v2, grid, cfg, dt, k1)
    q_new = _phase_integrand(v1_new, v2_new, np.abs(a_new) ** 2, grid, cfg)
    phi_new = state.phi.values - 0.5 * dt * (k1.q + q_new)
    return HydroState(
        t=state.t + dt,
        a=ScalarField(grid, a_new),
        v=VectorField2(grid, (v1_new, v2_new)),
        phi=RealField(grid, phi_new),
    )


def initial_state(A: ScalarField, Phi: RealField, t0: float = 0.0) -> HydroState:
    if A.grid != Phi.grid:
        raise ParameterError("amplitude and phase live on different grids")
    g1, g2 = grad_values(Phi.values, Phi.grid)
    return HydroState(t=t0, a=A, v=VectorField2(A.grid, (g1, g2)), phi=Phi)


def evolve_hydro(
    initial: Tuple[ScalarField, RealField],
    cfg: SolverConfig,
    on_step: Optional[Callable[[HydroState], None]] = None,
) -> List[HydroState]:
    """
    Integrate from (A, Phi) to cfg.T; returns the states at cfg.sample_steps().

    ``on_step`` (if given) sees every accepted state, which is how dense diagnostics are
    collected without storing the whole run. Non-finite values abort with
    SimulationDivergedError carrying the last finite state.
    """
    A, Phi = initial
    state = initial_state(A, Phi)
    grid = state.grid
    if not math.isclose(cfg.step, cfg.dt, rel_tol=1e-12):
        logger.warning(f"time step adjusted from {cfg.dt:.6g} to {cfg.step:.6g} to land on T={cfg.T}")
    logger.info(
        f"hydro run: eps={cfg.epsilon}, lam={cfg.lam}, n={grid.n}, L={grid.half_width}, "
        f"steps={cfg.n_steps}, path={cfg.poisson_path}"
    )
    wanted = set(cfg.sample_steps())
    samples = [state]
    if on_step is not None:
        on_step(state)

    dt = cfg.step
    a = state.a.values
    v1, v2 = state.v.components
    phi = state.phi.values
    k1 = _stage(a, v1, v2, grid, cfg)
    for step in range(1, cfg.n_steps + 1):
        _check_cfl(v1, v2, grid, dt)
        a_new, v1_new, v2_new = _lawson_rk4(a, v1, v2, grid, cfg, dt, k1)
        if not (np.all(np.isfinite(a_new)) and np.all(np.isfinite(v1_new)) and np.all(np.isfinite(v2_new))):
            logger.error(f"hydro run diverged at step {step} (t={step * dt:.6g})")
            last_good = HydroState(
                t=(step - 1) * dt,
                a=ScalarField(grid, a),
                v=VectorField2(grid, (v1, v2)),
                phi=RealField(grid, phi),
            )
            raise SimulationDivergedError(f"non-finite state at step {step}", last_good=last_good)
        k_next = _stage(a_new, v1_new, v2_new, grid, cfg)
        phi = phi - 0.5 * dt * (k1.q + k_next.q)
        a, v1, v2, k1 = a_new, v1_new, v2_new, k_next
        if step in wanted or on_step is not None:
            state = HydroState(
                t=step * dt,
                a=ScalarField(grid, a),
                v=VectorField2(grid, (v1, v2)),
                phi=RealField(grid, phi),
            )
            if on_step is not None:
                on_step(state)
            if step in wanted:
                samples.append(state)
                logger.debug(
                    f"t={state.t:.4f} mass={mass(state.a):.12g} curl={curl_residual(state.v):.3e}"
                )
    return samples


def reconstruct_phase(trajectory: Sequence[HydroState], cfg: SolverConfig,
                      Phi: Optional[RealField] = None) -> List[RealField]:
    """
    phi(t) = Phi - integral_0^t (|v|^2/2 + lam P) ds by the trapezoid rule over the samples.

    ``Phi`` defaults to the phase of the first sample. Runs from evolve_hydro already carry
    a per-step phase; this rebuilds it from sampled velocities and amplitudes alone.
    """
    if not trajectory:
        return []
    grid = trajectory[0].grid
    base = trajectory[0].phi if Phi is None else Phi
    times = np.array([s.t for s in trajectory])
    integrands = np.stack([phase_integrand(s, cfg).values for s in trajectory])
    if len(trajectory) == 1:
        return [RealField(grid, base.values)]
    accumulated = cumulative_trapezoid(integrands, times, axis=0, initial=0.0)
    return [RealField(grid, base.values - acc) for acc in accumulated]


def phase_consistency(state: HydroState) -> float:
    """||grad phi - v|| / ||v|| in L^2 (0 when v = 0 and grad phi = 0)."""
    g1, g2 = grad_values(state.phi.values, state.grid)
    v1, v2 = state.v.components
    norm_v = float(np.sqrt(np.sum(v1 * v1 + v2 * v2)))
    diff = float(np.sqrt(np.sum((g1 - v1) ** 2 + (g2 - v2) ** 2)))
    if norm_v == 0:
        return diff
    return diff / norm_v


def phase_growth(state: HydroState, Phi: RealField, R: float, n_angles: int = 720) -> float:
    """max over |x| = R of |phi(t) - Phi| / log<x>."""
    samples = sample_circle(state.phi.values - Phi.values, state.grid, R, n_angles)
    return float(np.max(np.abs(samples)) / log_bracket(R))
