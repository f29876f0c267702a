# models/poisson.py
"""
Free-space Poisson solver for -Delta P = f on the plane.

The potential is the subtracted log-kernel integral

    P(x) = -(1/2pi) * integral log(|x - y| / |y|) f(y) dy,

which fixes P(0) = 0 without any neutrality assumption on f. On the grid this is the
Newtonian convolution -(1/2pi) log|.| * f minus its value at the origin sample.
Two evaluation paths share one discrete kernel:

- ``direct``: O(n^4) quadrature, the oracle for small grids;
- ``fft``: zero padding to 2n x 2n so periodic images never touch the result.

The self cell of log|z| is replaced by its average over the disk of equal area,
log(r0) - 1/2 with r0 = h / sqrt(pi). The gradient kernel z/|z|^2 has zero self-cell
average by odd symmetry; its punctured lattice sum overshoots the integral by
(h^2/2) grad f, which both paths subtract (spectral grad f), leaving an O(h^4) error.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sp_fft

from models.errors import OutOfDomainError, ParameterError
from models.grid import (
    GridSpec,
    RealField,
    VectorField2,
    grad_values,
    laplacian_values,
    log_bracket,
    sample_circle,
    smooth_radial_cap,
)

__all__ = [
    "PotentialResult",
    "self_cell_log",
    "log_kernel_table",
    "potential_logkernel_direct",
    "potential_freespace_fft",
    "grad_potential",
    "hessian_riesz",
    "log_growth_ratio",
    "neutrality_diagnostic",
    "neutrality_slope",
    "newtonian_potential",
    "potential_values",
    "newtonian_values",
    "tapered_potential_values",
    "far_field_profile",
    "potential_gradient_spectral",
    "laplacian_residual",
    "dipole_density",
]

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
POISSON_PATHS = ("fft", "direct")

# taper of the logarithmic far field used by the time steppers, in units of L
TAPER_INNER = 0.85
TAPER_OUTER = 0.95


@dataclass(frozen=True)
class PotentialResult:
    P: RealField
    gradP: VectorField2
    mass: float


# -----------------------------
# Kernel tables
# -----------------------------
def self_cell_log(h: float) -> float:
    """Average of log|z| over the disk with the area of one h x h cell."""
    r0 = h / np.sqrt(np.pi)
    return float(np.log(r0) - 0.5)


def _kernels_at(d1: np.ndarray, d2: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    r2 = d1 * d1 + d2 * d2
    zero = r2 == 0.0
    safe = np.where(zero, 1.0, r2)
    log_k = np.where(zero, self_cell_log(h), 0.5 * np.log(safe))
    g1 = np.where(zero, 0.0, d1 / safe)
    g2 = np.where(zero, 0.0, d2 / safe)
    return log_k, g1, g2


@dataclass(frozen=True)
class _PaddedKernels:
    log_hat: np.ndarray
    g1_hat: np.ndarray
    g2_hat: np.ndarray


@lru_cache(maxsize=8)
def _padded_kernels(grid: GridSpec) -> _PaddedKernels:
    """Spectra of the kernels sampled on the doubled grid, offsets in circular order."""
    n = grid.n
    m = np.arange(2 * n)
    d = np.where(m < n, m, m - 2 * n) * grid.h
    D1, D2 = np.meshgrid(d, d, indexing="xy")
    log_k, g1, g2 = _kernels_at(D1, D2, grid.h)
    tables = []
    for table in (log_k, g1, g2):
        spec = sp_fft.rfft2(table)
        spec.setflags(write=False)
        tables.append(spec)
    logger.debug(f"built padded kernel tables for n={n}, L={grid.half_width}")
    return _PaddedKernels(*tables)


@lru_cache(maxsize=4)
def _direct_kernels(grid: GridSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Kernels on offsets -(n-1)..(n-1); index a <-> offset (a - n + 1) * h."""
    n = grid.n
    d = (np.arange(2 * n - 1) - (n - 1)) * grid.h
    D1, D2 = np.meshgrid(d, d, indexing="xy")
    tables = _kernels_at(D1, D2, grid.h)
    for table in tables:
        table.setflags(write=False)
    return tables


def log_kernel_table(grid: GridSpec) -> np.ndarray:
    """log|z| (self cell averaged) on offsets -(n-1)..(n-1) per axis, read-only."""
    return _direct_kernels(grid)[0]


def _convolve(values: np.ndarray, kernel_hat: np.ndarray, grid: GridSpec) -> np.ndarray:
    n = grid.n
    padded = np.zeros((2 * n, 2 * n))
    padded[:n, :n] = values
    out = sp_fft.irfft2(sp_fft.rfft2(padded) * kernel_hat, s=(2 * n, 2 * n))
    return out[:n, :n]


def _direct_sum(values: np.ndarray, table: np.ndarray, grid: GridSpec) -> np.ndarray:
    n = grid.n
    out = np.empty((n, n))
    for i2 in range(n):
        for i1 in range(n):
            window = table[i2:i2 + n, i1:i1 + n][::-1, ::-1]
            out[i2, i1] = np.sum(window * values)
    return out


def _real_values(f: RealField) -> np.ndarray:
    if not isinstance(f, RealField):
        raise ParameterError(f"expected a RealField density, got {type(f).__name__}")
    return f.values


# -----------------------------
# Array-level solvers (used by the time steppers)
# -----------------------------
def newtonian_values(rho: np.ndarray, grid: GridSpec, path: str = "fft") -> np.ndarray:
    """-(1/2pi) (log|.| * rho) sampled on the grid, no normalization."""
    scale = -grid.cell_area / TWO_PI
    if path == "fft":
        return scale * _convolve(rho, _padded_kernels(grid).log_hat, grid)
    if path == "direct":
        return scale * _direct_sum(rho, _direct_kernels(grid)[0], grid)
    raise ParameterError(f"unknown poisson path {path!r}; expected one of {POISSON_PATHS}")


def potential_values(rho: np.ndarray, grid: GridSpec, path: str = "fft") -> np.ndarray:
    """Subtracted log-kernel potential, exactly zero at the origin sample."""
    newton = newtonian_values(rho, grid, path)
    return newton - newton[grid.origin_index]


def _grad_values(rho: np.ndarray, grid: GridSpec, path: str) -> Tuple[np.ndarray, np.ndarray]:
    scale = -grid.cell_area / TWO_PI
    if path == "fft":
        kernels = _padded_kernels(grid)
        s1 = _convolve(rho, kernels.g1_hat, grid)
        s2 = _convolve(rho, kernels.g2_hat, grid)
    elif path == "direct":
        _, g1, g2 = _direct_kernels(grid)
        s1, s2 = _direct_sum(rho, g1, grid), _direct_sum(rho, g2, grid)
    else:
        raise ParameterError(f"unknown poisson path {path!r}; expected one of {POISSON_PATHS}")
    # lattice-sum correction: -(1/2pi) * (-(h^2/2) grad rho)
    d1, d2 = grad_values(rho, grid)
    corr = grid.cell_area / (2.0 * TWO_PI)
    return scale * s1 + corr * d1, scale * s2 + corr * d2


def far_field_profile(
    rho: np.ndarray, grid: GridSpec
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, Tuple[float, float]]:
    """
    -(M/2pi) log<x - c> about the centroid c of rho, with its gradient and Laplacian.

    Returns (P_model, dP1, dP2, lap, center). The model carries the whole logarithmic
    growth of P, so P - P_model is nearly flat at the box edge.
    """
    X1, X2 = grid.coords()
    mass = float(np.sum(rho) * grid.cell_area)
    total = float(np.sum(np.abs(rho)) * grid.cell_area)
    if total == 0.0:
        zeros = np.zeros(grid.shape)
        return zeros, zeros, zeros, zeros, (0.0, 0.0)
    if abs(mass) > 1e-12 * total:
        c1 = float(np.sum(X1 * rho) * grid.cell_area / mass)
        c2 = float(np.sum(X2 * rho) * grid.cell_area / mass)
    else:
        c1 = c2 = 0.0
    y1, y2 = X1 - c1, X2 - c2
    s = 1.0 + y1 * y1 + y2 * y2
    amp = -mass / TWO_PI
    return amp * 0.5 * np.log(s), amp * y1 / s, amp * y2 / s, amp * 2.0 / (s * s), (c1, c2)


def tapered_potential_values(P: np.ndarray, rho: np.ndarray, grid: GridSpec) -> np.ndarray:
    """
    P with its logarithmic far field smoothly flattened near the box edge.

    Identical to P for |x - c| <= 0.85 L; spectral derivatives of the result do not
    see the kink a log-growing P has across the periodic boundary.
    """
    model, _, _, _, (c1, c2) = far_field_profile(rho, grid)
    X1, X2 = grid.coords()
    r = np.hypot(X1 - c1, X2 - c2)
    L = grid.half_width
    rc = smooth_radial_cap(r, TAPER_INNER * L, TAPER_OUTER * L)
    mass = float(np.sum(rho) * grid.cell_area)
    capped = -(mass / TWO_PI) * 0.5 * np.log1p(rc * rc)
    return P - model + capped


# -----------------------------
# Public operations
# -----------------------------
def potential_logkernel_direct(f: RealField) -> PotentialResult:
    """Direct O(n^4) quadrature of P and grad P; oracle for n <= 48."""
    grid = f.grid
    rho = _real_values(f)
    if grid.n > 64:
        logger.warning(f"direct quadrature on n={grid.n} will be slow")
    P = potential_values(rho, grid, "direct")
    g1, g2 = _grad_values(rho, grid, "direct")
    return PotentialResult(
        P=RealField(grid, P),
        gradP=VectorField2(grid, (g1, g2)),
        mass=float(np.sum(rho) * grid.cell_area),
    )


def potential_freespace_fft(f: RealField) -> PotentialResult:
    """Same discrete sum as the direct path, evaluated by padded FFT convolution."""
    grid = f.grid
    rho = _real_values(f)
    P = potential_values(rho, grid, "fft")
    g1, g2 = _grad_values(rho, grid, "fft")
    return PotentialResult(
        P=RealField(grid, P),
        gradP=VectorField2(grid, (g1, g2)),
        mass=float(np.sum(rho) * grid.cell_area),
    )


def grad_potential(f: RealField) -> VectorField2:
    """grad P = -(1/2pi) integral (x - y)/|x - y|^2 f(y) dy, padded convolution."""
    g1, g2 = _grad_values(_real_values(f), f.grid, "fft")
    return VectorField2(f.grid, (g1, g2))


def newtonian_potential(f: RealField) -> RealField:
    """-(1/2pi) (log|.| * f) without origin normalization; differs from P by a constant."""
    return RealField(f.grid, newtonian_values(_real_values(f), f.grid, "fft"))


def hessian_riesz(f: RealField) -> Tuple[RealField, RealField, RealField, RealField]:
    """
    (d11 P, d12 P, d21 P, d22 P) via the multipliers -xi_j xi_k / |xi|^2 on the padded grid.

    At xi = 0 the off-diagonal multiplier is 0 and each diagonal one is -1/2: the box
    average of the free-space d_jj P is -M/(2 * box area), so the trace is exactly -f.
    """
    grid = f.grid
    rho = _real_values(f)
    n = grid.n
    padded = np.zeros((2 * n, 2 * n))
    padded[:n, :n] = rho
    spec = sp_fft.rfft2(padded)
    k1 = 2.0 * np.pi * sp_fft.rfftfreq(2 * n, d=grid.h)
    k2 = 2.0 * np.pi * sp_fft.fftfreq(2 * n, d=grid.h)
    K1, K2 = np.meshgrid(k1, k2, indexing="xy")
    ksq = K1 * K1 + K2 * K2
    ksq[0, 0] = 1.0
    m11 = -K1 * K1 / ksq
    m22 = -K2 * K2 / ksq
    m12 = -K1 * K2 / ksq
    m11[0, 0] = m22[0, 0] = -0.5
    m12[0, 0] = 0.0

    def _apply(mult):
        return sp_fft.irfft2(mult * spec, s=(2 * n, 2 * n))[:n, :n]

    h12 = RealField(grid, _apply(m12))
    return RealField(grid, _apply(m11)), h12, h12, RealField(grid, _apply(m22))


def log_growth_ratio(result: PotentialResult, R: float, n_angles: int = 720) -> float:
    """max over |x| = R of |P(x)| / log<x>; the growth bound predicts <= mass/2pi."""
    grid = result.P.grid
    samples = sample_circle(result.P.values, grid, R, n_angles)
    return float(np.max(np.abs(samples)) / log_bracket(R))


def neutrality_diagnostic(f: RealField, radii: Sequence[float]) -> List[Tuple[float, float]]:
    """(R, ||grad P||^2 on the disk |x| <= R) for each radius; growth ~ M^2/2pi per log R."""
    grid = f.grid
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ParameterError("radii must be strictly increasing")
    if radii and (radii[0] <= 0 or radii[-1] >= grid.half_width):
        raise OutOfDomainError(f"radii must lie in (0, L={grid.half_width})")
    g1, g2 = grad_potential(f).components
    density = (g1 * g1 + g2 * g2) * grid.cell_area
    r = grid.radius()
    # cells cut by the circle count with a linear partial weight
    return [(R, float(np.sum(density * np.clip((R - r) / grid.h + 0.5, 0.0, 1.0)))) for R in radii]


def neutrality_slope(pairs: Sequence[Tuple[float, float]]) -> float:
    """Least-squares slope of the truncated energy against log R."""
    if len(pairs) < 2:
        raise ParameterError("need at least two radii for a slope")
    logR = np.log([p[0] for p in pairs])
    energy = np.array([p[1] for p in pairs])
    return float(np.polyfit(logR, energy, 1)[0])


def potential_gradient_spectral(result: PotentialResult, f: RealField) -> VectorField2:
    """Spectral gradient of P with the log far field differentiated analytically."""
    grid = f.grid
    model, d1, d2, _, _ = far_field_profile(_real_values(f), grid)
    g1, g2 = grad_values(result.P.values - model, grid)
    return VectorField2(grid, (g1 + d1, g2 + d2))


def laplacian_residual(f: RealField, result: PotentialResult, radius_fraction: float = 0.6) -> float:
    """max |Delta P + f| on the disk |x| <= radius_fraction * L."""
    grid = f.grid
    rho = _real_values(f)
    model, _, _, lap_model, _ = far_field_profile(rho, grid)
    lap = laplacian_values(result.P.values - model, grid) + lap_model
    inside = grid.radius() <= radius_fraction * grid.half_width
    return float(np.max(np.abs(lap + rho)[inside]))


def dipole_density(grid: GridSpec, separation: float, sigma: float = 1.0,
                   axis: Optional[Tuple[float, float]] = None) -> RealField:
    """Neutral density g(x - d) - g(x + d) built from unit-mass Gaussians, |d| = separation/2."""
    direction = np.array(axis if axis is not None else (1.0, 0.0), dtype=float)
    direction /= np.linalg.norm(direction)
    d1, d2 = 0.5 * separation * direction
    X1, X2 = grid.coords()

    def _bump(c1, c2):
        return np.exp(-((X1 - c1) ** 2 + (X2 - c2) ** 2) / (2.0 * sigma ** 2)) / (TWO_PI * sigma ** 2)

    return RealField(grid, _bump(d1, d2) - _bump(-d1, -d2))
