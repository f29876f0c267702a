# models/grid.py

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from scipy import fft as sp_fft
from scipy import ndimage

from models.errors import InvalidGridError, OutOfDomainError, ParameterError

__all__ = [
    "GridSpec",
    "ScalarField",
    "RealField",
    "VectorField2",
    "build_grid",
    "spectral_gradient",
    "spectral_divergence",
    "spectral_laplacian",
    "bessel_multiplier",
    "dealias",
    "smooth_radial_cap",
    "sample_circle",
    "log_bracket",
    "fft2",
    "ifft2",
    "grad_values",
    "div_values",
    "laplacian_values",
    "bessel_values",
    "dealias_values",
    "frequency_squared",
]

logger = logging.getLogger(__name__)

MIN_POINTS = 8


# -----------------------------
# Grid
# -----------------------------
@dataclass(frozen=True)
class GridSpec:
    """
    Uniform grid on the square [-L, L)^2 with n points per axis.

    Arrays living on the grid are indexed ``values[i2, i1]`` so that x1 runs fastest
    in row-major order; the sample nearest the origin is ``values[n//2, n//2]`` and sits
    exactly at x = 0.
    """

    half_width: float
    n: int

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n, self.n)

    @property
    def origin_index(self) -> Tuple[int, int]:
        return (self.n // 2, self.n // 2)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def axis(self) -> np.ndarray:
        return _axis(self)

    def coords(self) -> Tuple[np.ndarray, np.ndarray]:
        """(X1, X2) sample coordinates, shape n x n, read-only."""
        c = _coords(self)
        return c[0], c[1]

    def radius(self) -> np.ndarray:
        return _coords(self)[2]

    def wavenumbers(self) -> np.ndarray:
        """Per-axis wavenumbers pi*k/L in FFT order, k = -n/2 .. n/2-1."""
        return _wavenumbers(self)


def build_grid(L: float, n: int) -> GridSpec:
    """Validate and build a grid; raises InvalidGridError for odd/small n or L <= 0."""
    try:
        n_int = int(n)
    except (TypeError, ValueError):
        raise InvalidGridError(f"n must be an integer, got {n!r}")
    if n_int != n or n_int % 2 != 0 or n_int < MIN_POINTS:
        raise InvalidGridError(f"n must be even and >= {MIN_POINTS}, got {n}")
    if not np.isfinite(L) or L <= 0:
        raise InvalidGridError(f"half width L must be positive, got {L}")
    return GridSpec(half_width=float(L), n=n_int)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=32)
def _axis(grid: GridSpec) -> np.ndarray:
    return _readonly(-grid.half_width + grid.h * np.arange(grid.n))


@lru_cache(maxsize=32)
def _coords(grid: GridSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = _axis(grid)
    X1, X2 = np.meshgrid(x, x, indexing="xy")
    R = np.hypot(X1, X2)
    return _readonly(X1), _readonly(X2), _readonly(R)


@lru_cache(maxsize=32)
def _wavenumbers(grid: GridSpec) -> np.ndarray:
    return _readonly(2.0 * np.pi * sp_fft.fftfreq(grid.n, d=grid.h))


@dataclass(frozen=True)
class _Symbols:
    ik1: np.ndarray
    ik2: np.ndarray
    ksq: np.ndarray
    keep: np.ndarray


@lru_cache(maxsize=32)
def _symbols(grid: GridSpec) -> _Symbols:
    k = _wavenumbers(grid)
    # Nyquist mode dropped from every symbol so real fields stay real and lap = div grad
    k_odd = k.copy()
    k_odd[grid.n // 2] = 0.0
    K1, K2 = np.meshgrid(k_odd, k_odd, indexing="xy")
    idx = np.abs(np.rint(sp_fft.fftfreq(grid.n) * grid.n)).astype(int)
    I1, I2 = np.meshgrid(idx, idx, indexing="xy")
    cutoff = grid.n // 3
    keep = (I1 <= cutoff) & (I2 <= cutoff)
    return _Symbols(
        ik1=_readonly(1j * K1),
        ik2=_readonly(1j * K2),
        ksq=_readonly(K1 ** 2 + K2 ** 2),
        keep=_readonly(keep),
    )


# -----------------------------
# Fields
# -----------------------------
def _checked(values, grid: GridSpec, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.shape != grid.shape:
        raise InvalidGridError(f"field shape {arr.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("field contains non-finite values")
    return _readonly(arr)


@dataclass(frozen=True)
class ScalarField:
    """Complex field on a grid (u, a, a_j, ...). Values are copied and frozen."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _checked(self.values, self.grid, np.complex128))


@dataclass(frozen=True)
class RealField:
    """Real field on a grid (phases, potentials, weights)."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _checked(self.values, self.grid, np.float64))


@dataclass(frozen=True)
class VectorField2:
    """Two-component field; components stay real when both inputs are real."""

    grid: GridSpec
    components: Tuple[np.ndarray, np.ndarray] = field(repr=False)

    def __post_init__(self):
        c1, c2 = self.components
        dtype = np.float64 if not (np.iscomplexobj(c1) or np.iscomplexobj(c2)) else np.complex128
        object.__setattr__(
            self,
            "components",
            (_checked(c1, self.grid, dtype), _checked(c2, self.grid, dtype)),
        )

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.components[0])


AnyScalar = Union[ScalarField, RealField]


def _like(f: AnyScalar, values: np.ndarray) -> AnyScalar:
    if isinstance(f, RealField):
        return RealField(f.grid, np.real(values))
    return ScalarField(f.grid, values)


# -----------------------------
# Array-level spectral kernels (shared by the solvers)
# -----------------------------
def fft2(values: np.ndarray) -> np.ndarray:
    return sp_fft.fft2(values)


def ifft2(values: np.ndarray) -> np.ndarray:
    return sp_fft.ifft2(values)


def grad_values(values: np.ndarray, grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    sym = _symbols(grid)
    F = fft2(values)
    g1 = ifft2(sym.ik1 * F)
    g2 = ifft2(sym.ik2 * F)
    if not np.iscomplexobj(values):
        return g1.real, g2.real
    return g1, g2


def div_values(v1: np.ndarray, v2: np.ndarray, grid: GridSpec) -> np.ndarray:
    sym = _symbols(grid)
    out = ifft2(sym.ik1 * fft2(v1) + sym.ik2 * fft2(v2))
    if not (np.iscomplexobj(v1) or np.iscomplexobj(v2)):
        return out.real
    return out


def laplacian_values(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    out = ifft2(-_symbols(grid).ksq * fft2(values))
    return out if np.iscomplexobj(values) else out.real


def bessel_values(values: np.ndarray, grid: GridSpec, s: float) -> np.ndarray:
    if s == 0:
        return np.array(values, copy=True)
    mult = (1.0 + _symbols(grid).ksq) ** (0.5 * s)
    out = ifft2(mult * fft2(values))
    return out if np.iscomplexobj(values) else out.real


def dealias_values(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    out = ifft2(np.where(_symbols(grid).keep, fft2(values), 0.0))
    return out if np.iscomplexobj(values) else out.real


# -----------------------------
# Field-level operations
# -----------------------------
def spectral_gradient(f: AnyScalar) -> VectorField2:
    """(d1 f, d2 f) by the Fourier multiplier i*xi; exact for resolved periodic modes."""
    g1, g2 = grad_values(f.values, f.grid)
    return VectorField2(f.grid, (g1, g2))


def spectral_divergence(v: VectorField2) -> AnyScalar:
    out = div_values(v.components[0], v.components[1], v.grid)
    return RealField(v.grid, out) if v.is_real else ScalarField(v.grid, out)


def spectral_laplacian(f: AnyScalar) -> AnyScalar:
    return _like(f, laplacian_values(f.values, f.grid))


def bessel_multiplier(f: AnyScalar, s: float) -> AnyScalar:
    """Apply (1 + |xi|^2)^(s/2)."""
    return _like(f, bessel_values(f.values, f.grid, float(s)))


def dealias(f: AnyScalar) -> AnyScalar:
    """2/3 rule: zero every mode with |k| > n//3 along either axis."""
    return _like(f, dealias_values(f.values, f.grid))


def sample_circle(values: np.ndarray, grid: GridSpec, R: float, n_angles: int = 720) -> np.ndarray:
    """Cubic-spline samples of a real grid array on the circle |x| = R."""
    L = grid.half_width
    if not 0.0 < R < L:
        raise OutOfDomainError(f"radius {R} must lie in (0, L={L})")
    theta = np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False)
    i1 = (R * np.cos(theta) + L) / grid.h
    i2 = (R * np.sin(theta) + L) / grid.h
    return ndimage.map_coordinates(values, [i2, i1], order=3, mode="nearest")


def log_bracket(R: float) -> float:
    """log<R> = log sqrt(1 + R^2)."""
    return float(0.5 * np.log1p(R * R))


def smooth_radial_cap(r: np.ndarray, r0: float, r1: float) -> np.ndarray:
    """
    Monotone C^2 map equal to r for r <= r0 and constant for r >= r1.

    Its derivative is 1 - S((r - r0)/(r1 - r0)) with S the quintic smoothstep, so
    r1 is reached with value r0 + (r1 - r0)/2.
    """
    if not 0 < r0 < r1:
        raise ParameterError(f"need 0 < r0 < r1, got r0={r0}, r1={r1}")
    width = r1 - r0
    tau = np.clip((np.asarray(r, dtype=float) - r0) / width, 0.0, 1.0)
    capped = r0 + width * (tau - (tau ** 6 - 3.0 * tau ** 5 + 2.5 * tau ** 4))
    return np.where(r <= r0, r, capped)


def frequency_squared(grid: GridSpec) -> np.ndarray:
    """|xi|^2 on the FFT layout, read-only."""
    return _symbols(grid).ksq
