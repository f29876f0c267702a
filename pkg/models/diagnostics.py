# models/diagnostics.py
"""
Norms and functionals evaluated on grid fields.

Quadratures are h^2-weighted sums over the truncated box; Sobolev norms are taken on
the Fourier side with the Bessel multiplier <xi>^s and Parseval.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from models.errors import ArityError, ParameterError
from models.grid import (
    GridSpec,
    RealField,
    ScalarField,
    VectorField2,
    fft2,
    grad_values,
    smooth_radial_cap,
    frequency_squared,
)
from models.poisson import log_kernel_table, newtonian_values

__all__ = [
    "NormReport",
    "lp_norm",
    "hs_norm",
    "zhidkov_norm",
    "mass",
    "weighted_moment",
    "energy_functional",
    "energy_double_sum",
    "curl_residual",
    "truncated_weight",
    "weight_identity_terms",
    "weight_identity_residual",
    "norm_report",
    "relative_drift",
]

logger = logging.getLogger(__name__)

AnyField = Union[ScalarField, RealField]


@dataclass(frozen=True)
class NormReport:
    name: str
    value: float
    parameters: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.value) or self.value < 0:
            raise ParameterError(f"{self.name}: norm value must be finite and >= 0, got {self.value}")

    def as_row(self) -> Dict[str, float]:
        row = {"name": self.name, "value": self.value}
        row.update(self.parameters)
        return row


# -----------------------------
# Norms
# -----------------------------
def lp_norm(f: AnyField, p: float) -> float:
    p = float(p)
    if not (p >= 1.0):
        raise ParameterError(f"p must lie in [1, inf], got {p}")
    mod = np.abs(f.values)
    if np.isinf(p):
        return float(np.max(mod))
    return float((np.sum(mod ** p) * f.grid.cell_area) ** (1.0 / p))


def _spectral_l2(values: np.ndarray, grid: GridSpec, weight: np.ndarray) -> float:
    # Parseval: h^2 sum |f|^2 = (h^2 / n^2) sum |F|^2
    F = fft2(values)
    total = np.sum(weight * np.abs(F) ** 2) * grid.cell_area / (grid.n * grid.n)
    return float(np.sqrt(total))


def hs_norm(f: AnyField, s: float) -> float:
    """||<xi>^s f^||_{L^2}; s >= 0."""
    if s < 0:
        raise ParameterError(f"hs_norm needs s >= 0, got {s}")
    weight = (1.0 + frequency_squared(f.grid)) ** s
    return _spectral_l2(f.values, f.grid, weight)


def _vector_hs(components: Tuple[np.ndarray, np.ndarray], grid: GridSpec, s: float) -> float:
    weight = (1.0 + frequency_squared(grid)) ** s
    return float(np.hypot(_spectral_l2(components[0], grid, weight), _spectral_l2(components[1], grid, weight)))


def zhidkov_norm(f: AnyField, s: float) -> float:
    """||f||_inf + ||grad f||_{H^(s-1)}, s > 1."""
    if s <= 1:
        raise ParameterError(f"zhidkov_norm needs s > 1, got {s}")
    grad = grad_values(f.values, f.grid)
    return lp_norm(f, np.inf) + _vector_hs(grad, f.grid, s - 1.0)


def mass(f: AnyField) -> float:
    return float(np.sum(np.abs(f.values) ** 2) * f.grid.cell_area)


def weighted_moment(f: AnyField, alpha: float, j: int = 0) -> float:
    """integral (1 + |x|)^(alpha / 2^j) |f|^2 dx over the box."""
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
    if j < 0:
        raise ParameterError(f"j must be >= 0, got {j}")
    exponent = alpha / 2.0 ** j
    weight = (1.0 + f.grid.radius()) ** exponent
    return float(np.sum(weight * np.abs(f.values) ** 2) * f.grid.cell_area)


def norm_report(name: str, value: float, **parameters) -> NormReport:
    return NormReport(name=name, value=float(value), parameters=dict(parameters))


def curl_residual(v: VectorField2) -> float:
    """||d1 v2 - d2 v1|| / ||v||, both L^2; 0 for v = 0."""
    grid = v.grid
    v1, v2 = v.components
    norm_v = np.sqrt(np.sum(np.abs(v1) ** 2 + np.abs(v2) ** 2))
    if norm_v == 0.0:
        return 0.0
    d1v2, _ = grad_values(v2, grid)
    _, d2v1 = grad_values(v1, grid)
    return float(np.sqrt(np.sum(np.abs(d1v2 - d2v1) ** 2)) / norm_v)


# -----------------------------
# Energy
# -----------------------------
def energy_functional(u: ScalarField, lam: float, epsilon: float = 1.0) -> float:
    """
    E[u] = (eps^2/2) ||grad u||^2 + (lam/2) integral P~ |u|^2, P~ the Newtonian potential.

    With epsilon = 1 this is the energy of the unscaled system; the eps^2 factor makes it
    the conserved quantity of the semiclassical flow.
    """
    grid = u.grid
    g1, g2 = grad_values(u.values, grid)
    kinetic = 0.5 * epsilon ** 2 * float(np.sum(np.abs(g1) ** 2 + np.abs(g2) ** 2)) * grid.cell_area
    if lam == 0:
        return kinetic
    rho = np.abs(u.values) ** 2
    newton = newtonian_values(rho, grid, "fft")
    return kinetic + 0.5 * lam * float(np.sum(newton * rho)) * grid.cell_area


def energy_double_sum(u: ScalarField, lam: float, epsilon: float = 1.0) -> float:
    """Same energy with the interaction as -(lam/4pi) sum_x sum_y log|x - y| rho(x) rho(y) h^4."""
    grid = u.grid
    n = grid.n
    if n > 32:
        logger.warning(f"energy double sum on n={n} builds an {n * n} x {n * n} kernel")
    g1, g2 = grad_values(u.values, grid)
    kinetic = 0.5 * epsilon ** 2 * float(np.sum(np.abs(g1) ** 2 + np.abs(g2) ** 2)) * grid.cell_area
    if lam == 0:
        return kinetic
    rho = (np.abs(u.values) ** 2).ravel()
    log_table = log_kernel_table(grid)
    i = np.arange(n)
    I2, I1 = np.meshgrid(i, i, indexing="ij")
    i1 = I1.ravel()
    i2 = I2.ravel()
    # offset index (x - y) / h + n - 1 into the direct kernel table
    K = log_table[i2[:, None] - i2[None, :] + n - 1, i1[:, None] - i1[None, :] + n - 1]
    interaction = float(rho @ K @ rho) * grid.cell_area ** 2
    return kinetic - lam / (4.0 * np.pi) * interaction


# -----------------------------
# Weight identity
# -----------------------------
def truncated_weight(grid: GridSpec, outer_fraction: float = 0.9) -> RealField:
    """(1 + |x|^2)^(1/2) with |x| smoothly capped so w is constant beyond outer_fraction * L."""
    L = grid.half_width
    rc = smooth_radial_cap(grid.radius(), (outer_fraction - 0.15) * L, outer_fraction * L)
    return RealField(grid, np.sqrt(1.0 + rc * rc))


def _identity_rhs(state, w: RealField, epsilon: float) -> float:
    grid = w.grid
    w1, w2 = grad_values(w.values, grid)
    v = getattr(state, "v", None)
    amp = state.a.values if v is not None else state.u.values
    a1, a2 = grad_values(amp, grid)
    flux = epsilon * float(np.sum(np.imag((w1 * a1 + w2 * a2) * np.conj(amp))))
    if v is not None:
        v1, v2 = v.components
        flux += float(np.sum((w1 * v1 + w2 * v2) * np.abs(amp) ** 2))
    return flux * grid.cell_area


def _weighted_mass(state, w: RealField) -> float:
    amp = state.a.values if getattr(state, "v", None) is not None else state.u.values
    return float(np.sum(w.values * np.abs(amp) ** 2) * w.grid.cell_area)


def weight_identity_terms(trajectory: Sequence, w: RealField, epsilon: float) -> Tuple[float, float]:
    """
    (d/dt integral w|u|^2 by centered difference, right-hand side at the middle sample).

    Wave states use eps Im integral (grad w . grad u) conj(u); hydro states add the
    transport term integral (grad w . v)|a|^2.
    """
    if len(trajectory) != 3:
        raise ArityError(f"weight identity needs samples at t - dt, t, t + dt; got {len(trajectory)}")
    before, middle, after = trajectory
    dt_left = middle.t - before.t
    dt_right = after.t - middle.t
    if dt_left <= 0 or not np.isclose(dt_left, dt_right, rtol=1e-9, atol=0.0):
        raise ArityError(f"samples must be equally spaced in time, got {dt_left} and {dt_right}")
    lhs = (_weighted_mass(after, w) - _weighted_mass(before, w)) / (2.0 * dt_left)
    return lhs, _identity_rhs(middle, w, epsilon)


def weight_identity_residual(trajectory: Sequence, w: RealField, epsilon: float) -> float:
    lhs, rhs = weight_identity_terms(trajectory, w, epsilon)
    return abs(lhs - rhs)


def relative_drift(values: Sequence[float], reference: Optional[float] = None) -> float:
    """max |q(t) - q(0)| / |q(0)|; absolute when q(0) = 0."""
    arr = np.asarray(values, dtype=float)
    ref = arr[0] if reference is None else reference
    scale = abs(ref) if ref != 0 else 1.0
    return float(np.max(np.abs(arr - ref)) / scale)
