# models/nls.py
"""
Split-step solver for  i eps du/dt + (eps^2/2) Delta u = lam P u,  -Delta P = |u|^2,
and the Madelung maps between (a, phi) and u = a exp(i phi / eps).
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from models.diagnostics import hs_norm
from models.dynamics import SolverConfig
from models.errors import ParameterError, ResolutionError, SimulationDivergedError
from models.grid import (
    GridSpec,
    RealField,
    ScalarField,
    dealias_values,
    fft2,
    frequency_squared,
    grad_values,
    ifft2,
)
from models.poisson import potential_values, tapered_potential_values

__all__ = [
    "WaveState",
    "kinetic_step",
    "potential_step",
    "evolve_nls",
    "madelung_lift",
    "madelung_project",
    "lift_hs_bound_terms",
    "resolution_floor",
    "check_resolution",
]

logger = logging.getLogger(__name__)

POINTS_PER_WAVELENGTH = 8


@dataclass(frozen=True)
class WaveState:
    t: float
    u: ScalarField
    psi: Optional[RealField] = None

    @property
    def grid(self) -> GridSpec:
        return self.u.grid


def _require_semiclassical(epsilon: float) -> None:
    if not epsilon > 0:
        raise ParameterError(f"the wave solver needs epsilon > 0, got {epsilon}; use the hydro solver for eps = 0")


# -----------------------------
# Sub-steps
# -----------------------------
def _kinetic_values(u: np.ndarray, grid: GridSpec, dt: float, epsilon: float) -> np.ndarray:
    return ifft2(np.exp(-0.5j * epsilon * frequency_squared(grid) * dt) * fft2(u))


def kinetic_step(u: ScalarField, dt: float, epsilon: float) -> ScalarField:
    """Exact free flow over dt: multiplier exp(-i eps |xi|^2 dt / 2)."""
    _require_semiclassical(epsilon)
    if dt == 0:
        return u
    return ScalarField(u.grid, _kinetic_values(u.values, u.grid, dt, epsilon))


def potential_step(u: ScalarField, dt: float, epsilon: float, lam: float, path: str = "fft") -> ScalarField:
    """u exp(-i lam P dt / eps) with P computed once from |u|^2; |u| is unchanged."""
    _require_semiclassical(epsilon)
    if lam == 0 or dt == 0:
        return u
    P = potential_values(np.abs(u.values) ** 2, u.grid, path)
    return ScalarField(u.grid, u.values * np.exp(-1j * lam * P * dt / epsilon))


# -----------------------------
# Hamilton-Jacobi phase
# -----------------------------
def _hj_rate(psi: np.ndarray, P_tapered: np.ndarray, grid: GridSpec, cfg: SolverConfig) -> np.ndarray:
    g1, g2 = grad_values(psi, grid)
    kinetic = 0.5 * (g1 * g1 + g2 * g2)
    if cfg.dealias:
        kinetic = dealias_values(kinetic, grid)
    return -(kinetic + cfg.lam * P_tapered)


def evolve_nls(u0: ScalarField, cfg: SolverConfig, psi0: Optional[RealField] = None) -> List[WaveState]:
    """
    Strang splitting (half potential, kinetic, half potential) to cfg.T.

    P is recomputed from |u|^2 after every kinetic sub-step; since the potential sub-flow
    leaves |u| unchanged the same P serves the half step that follows. When ``psi0`` is
    given, the Hamilton-Jacobi phase dpsi/dt = -(|grad psi|^2/2 + lam P) is advanced
    alongside by Heun's method on the potentials at both ends of the step.
    """
    _require_semiclassical(cfg.epsilon)
    grid = u0.grid
    if psi0 is not None and psi0.grid != grid:
        raise ParameterError("psi0 lives on a different grid than u0")
    eps, lam, dt = cfg.epsilon, cfg.lam, cfg.step
    path = cfg.poisson_path
    logger.info(
        f"wave run: eps={eps}, lam={lam}, n={grid.n}, L={grid.half_width}, steps={cfg.n_steps}"
        f"{', tracking psi' if psi0 is not None else ''}"
    )
    wanted = set(cfg.sample_steps())
    state = WaveState(t=0.0, u=u0, psi=psi0)
    samples = [state]

    u = u0.values
    psi = None if psi0 is None else psi0.values
    rho = np.abs(u) ** 2
    P = potential_values(rho, grid, path) if lam != 0 else np.zeros(grid.shape)
    for step in range(1, cfg.n_steps + 1):
        P_start, rho_start, u_start = P, rho, u
        u = u * np.exp(-0.5j * lam * P * dt / eps)
        u = _kinetic_values(u, grid, dt, eps)
        rho = np.abs(u) ** 2
        P = potential_values(rho, grid, path) if lam != 0 else P
        u = u * np.exp(-0.5j * lam * P * dt / eps)
        if not np.all(np.isfinite(u)):
            logger.error(f"wave run diverged at step {step}")
            last_good = WaveState(
                t=(step - 1) * dt,
                u=ScalarField(grid, u_start),
                psi=None if psi is None else RealField(grid, psi),
            )
            raise SimulationDivergedError(f"non-finite wave function at step {step}", last_good=last_good)
        if psi is not None:
            Pt_start = tapered_potential_values(P_start, rho_start, grid) if lam != 0 else P_start
            Pt_end = tapered_potential_values(P, rho, grid) if lam != 0 else P
            rate = _hj_rate(psi, Pt_start, grid, cfg)
            predictor = psi + dt * rate
            psi = psi + 0.5 * dt * (rate + _hj_rate(predictor, Pt_end, grid, cfg))
        if step in wanted:
            state = WaveState(
                t=step * dt,
                u=ScalarField(grid, u),
                psi=None if psi is None else RealField(grid, psi),
            )
            samples.append(state)
    return samples


# -----------------------------
# Madelung maps
# -----------------------------
def madelung_lift(a: ScalarField, phi: RealField, epsilon: float) -> ScalarField:
    """u = a exp(i phi / eps)."""
    _require_semiclassical(epsilon)
    return ScalarField(a.grid, a.values * np.exp(1j * phi.values / epsilon))


def madelung_project(u: ScalarField, psi: RealField, epsilon: float) -> ScalarField:
    """a = u exp(-i psi / eps); inverse of madelung_lift for the same phase."""
    _require_semiclassical(epsilon)
    return ScalarField(u.grid, u.values * np.exp(-1j * psi.values / epsilon))


def lift_hs_bound_terms(a: ScalarField, phi: RealField, s: float, epsilon: float = 1.0) -> Tuple[float, float]:
    """
    (||a e^{i phi/eps}||_{H^s}, ||a||_{H^s} (1 + ||D^2 phi/eps||_{H^{s-2}}) (1 + ||grad phi/eps||_inf^[s]))

    [s] is the smallest integer larger than s. The first value is bounded by a constant
    times the second.
    """
    if s < 2:
        raise ParameterError(f"bound terms need s >= 2, got {s}")
    grid = a.grid
    scaled = phi.values / epsilon
    lhs = hs_norm(madelung_lift(a, phi, epsilon), s)
    g1, g2 = grad_values(scaled, grid)
    h11, h12 = grad_values(g1, grid)
    _, h22 = grad_values(g2, grid)
    hess = math.sqrt(sum(hs_norm(RealField(grid, h), s - 2) ** 2 for h in (h11, h12, h12, h22)))
    sup_grad = float(np.max(np.hypot(g1, g2)))
    power = math.floor(s) + 1
    bracket = hs_norm(a, s)
    return lhs, bracket * (1.0 + hess) * (1.0 + sup_grad ** power)


# -----------------------------
# Resolution guard
# -----------------------------
def resolution_floor(grid: GridSpec, max_gradient: float) -> float:
    """Smallest eps giving >= 8 points per local wavelength 2 pi eps / |grad phi|."""
    return POINTS_PER_WAVELENGTH * grid.h * max_gradient / (2.0 * np.pi)


def check_resolution(epsilon: float, phi: RealField, max_gradient: Optional[float] = None) -> float:
    """Raise ResolutionError when eps is below the floor; returns the floor."""
    if max_gradient is None:
        g1, g2 = grad_values(phi.values, phi.grid)
        max_gradient = float(np.max(np.hypot(g1, g2)))
    floor = resolution_floor(phi.grid, max_gradient)
    if epsilon < floor:
        raise ResolutionError(
            f"eps={epsilon} under-resolves phase oscillations on h={phi.grid.h:.4g} "
            f"(max|grad phi|={max_gradient:.4g}, need eps >= {floor:.4g})"
        )
    return floor
