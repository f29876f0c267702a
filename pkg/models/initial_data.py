# models/initial_data.py
"""Initial amplitudes and phases for the experiment presets."""

import logging
from typing import Optional, Tuple

import numpy as np

from models.config import ExperimentConfig
from models.diagnostics import hs_norm
from models.errors import OutOfDomainError, ResolutionError
from models.grid import GridSpec, RealField, ScalarField, smooth_radial_cap

__all__ = [
    "make_initial_data",
    "make_corrector",
    "make_density",
    "gaussian_amplitude",
    "neglog_phase",
    "unit_bump",
]

logger = logging.getLogger(__name__)

MIN_POINTS_PER_SIGMA = 4
EDGE_DECAY = 1e-10

# the neglog phase keeps |x| exact up to 0.7 L and is flat beyond 0.9 L
PHASE_CAP_INNER = 0.7
PHASE_CAP_OUTER = 0.9


def _edge_max(values: np.ndarray) -> float:
    return float(max(
        np.max(np.abs(values[0, :])),
        np.max(np.abs(values[-1, :])),
        np.max(np.abs(values[:, 0])),
        np.max(np.abs(values[:, -1])),
    ))


def gaussian_amplitude(grid: GridSpec, center=(0.0, 0.0), sigma: float = 1.0, mass: float = 1.0) -> np.ndarray:
    """sqrt(mass / (pi sigma^2)) exp(-|x - c|^2 / (2 sigma^2)); |A|^2 integrates to mass."""
    X1, X2 = grid.coords()
    r2 = (X1 - center[0]) ** 2 + (X2 - center[1]) ** 2
    return np.sqrt(mass / (np.pi * sigma ** 2)) * np.exp(-r2 / (2.0 * sigma ** 2))


def _normalized(values: np.ndarray, grid: GridSpec, mass: float) -> np.ndarray:
    total = float(np.sum(np.abs(values) ** 2) * grid.cell_area)
    return values * np.sqrt(mass / total)


def _amplitude(cfg: ExperimentConfig) -> np.ndarray:
    grid, data = cfg.grid, cfg.data
    if data.amplitude == "gaussian":
        return gaussian_amplitude(grid, data.center, data.sigma, data.mass)
    if data.amplitude == "ring":
        r = np.hypot(grid.coords()[0] - data.center[0], grid.coords()[1] - data.center[1])
        ring = np.exp(-((r - data.ring_radius) ** 2) / (2.0 * data.sigma ** 2))
        return _normalized(ring, grid, data.mass)
    # dipole: opposite-sign lumps at +-separation/2 along x1
    d = 0.5 * data.separation
    c1, c2 = data.center
    pair = (gaussian_amplitude(grid, (c1 + d, c2), data.sigma, 1.0)
            - gaussian_amplitude(grid, (c1 - d, c2), data.sigma, 1.0))
    return _normalized(pair, grid, data.mass)


def neglog_phase(grid: GridSpec) -> np.ndarray:
    """-log<x> with |x| smoothly capped near the box edge; max |grad| = 1/2 at |x| = 1."""
    L = grid.half_width
    rc = smooth_radial_cap(grid.radius(), PHASE_CAP_INNER * L, PHASE_CAP_OUTER * L)
    return -0.5 * np.log1p(rc * rc)


def make_corrector(cfg: ExperimentConfig) -> Optional[ScalarField]:
    """data.corrector times a displaced unit-mass Gaussian; None when the factor is 0."""
    data = cfg.data
    if data.corrector == 0:
        return None
    shift = (data.center[0] + 0.5 * data.sigma, data.center[1] + 0.25 * data.sigma)
    return ScalarField(cfg.grid, data.corrector * gaussian_amplitude(cfg.grid, shift, data.sigma, 1.0))


def make_initial_data(cfg: ExperimentConfig, epsilon: float = 0.0) -> Tuple[ScalarField, RealField]:
    """
    (A, Phi) for the configured preset; A = A_0 + eps A_1 when a corrector is configured.

    Raises ResolutionError when sigma < 4h and OutOfDomainError when |A| at the box edge
    exceeds 1e-10.
    """
    grid, data = cfg.grid, cfg.data
    if data.sigma < MIN_POINTS_PER_SIGMA * grid.h:
        raise ResolutionError(
            f"sigma={data.sigma} is under-resolved on h={grid.h:.4g} (need sigma >= {MIN_POINTS_PER_SIGMA}h)"
        )
    amp = _amplitude(cfg).astype(complex)
    corrector = make_corrector(cfg)
    if corrector is not None and epsilon:
        amp = amp + epsilon * corrector.values
    edge = _edge_max(amp)
    if edge > EDGE_DECAY:
        raise OutOfDomainError(f"initial amplitude is {edge:.3e} at the box edge; enlarge grid.L")
    if data.phase == "zero":
        phase = np.zeros(grid.shape)
    else:
        phase = neglog_phase(grid)
    logger.debug(f"initial data: {data.amplitude}/{data.phase}, eps={epsilon}, n={grid.n}")
    return ScalarField(grid, amp), RealField(grid, phase)


def unit_bump(grid: GridSpec, s: float, center=(1.0, 0.0), sigma: float = 1.0) -> ScalarField:
    """Gaussian bump normalized to unit H^s norm."""
    bump = ScalarField(grid, gaussian_amplitude(grid, center, sigma, 1.0))
    return ScalarField(grid, bump.values / hs_norm(bump, s))


def make_density(cfg: ExperimentConfig) -> RealField:
    """|A_0|^2 as a Poisson source; only the density has to decay at the box edge."""
    grid, data = cfg.grid, cfg.data
    if data.sigma < MIN_POINTS_PER_SIGMA * grid.h:
        raise ResolutionError(
            f"sigma={data.sigma} is under-resolved on h={grid.h:.4g} (need sigma >= {MIN_POINTS_PER_SIGMA}h)"
        )
    rho = np.abs(_amplitude(cfg)) ** 2
    edge = _edge_max(rho)
    if edge > EDGE_DECAY:
        raise OutOfDomainError(f"density is {edge:.3e} at the box edge; enlarge grid.L")
    return RealField(grid, rho)
