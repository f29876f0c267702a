# models/wkb.py
"""
WKB expansion machinery: u^eps = exp(i phi0 / eps) (beta_0 + eps beta_1 + ...).

- weighted partitions index the phase-corrector products inside beta_j;
- correctors (a_j, phi_j) come either from a pointwise polynomial fit in eps over a sweep
  of hydro runs, or (first order) from the linearized system around the eps = 0 run;
- convergence orders are least-squares slopes in log-log coordinates.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from models.dynamics import HydroState, SolverConfig, _stage
from models.errors import (
    ArityError,
    ConditioningError,
    DependencyError,
    ParameterError,
)
from models.grid import (
    GridSpec,
    RealField,
    ScalarField,
    VectorField2,
    dealias_values,
    div_values,
    grad_values,
    laplacian_values,
)
from models.nls import WaveState
from models.poisson import potential_values, tapered_potential_values

__all__ = [
    "WeightedPartition",
    "ExpansionSet",
    "ConvergenceReport",
    "CascadeState",
    "weighted_partitions",
    "assemble_beta",
    "build_expansion",
    "extract_correctors",
    "first_order_cascade",
    "wkb_error",
    "fit_convergence_rate",
]

logger = logging.getLogger(__name__)

MIN_NODE_RATIO = 1.5
MAX_CONDITION = 1e12
FLAG_ORDER = 0.1
FLAG_RESIDUAL = 0.1


# -----------------------------
# Types
# -----------------------------
@dataclass(frozen=True)
class WeightedPartition:
    """sigma = (sigma_1, ..., sigma_l) with sum_k k * sigma_k = l."""

    sigma: Tuple[int, ...]

    def __post_init__(self):
        sigma = tuple(int(s) for s in self.sigma)
        if any(s < 0 for s in sigma):
            raise ParameterError(f"partition counts must be >= 0, got {sigma}")
        if sum((k + 1) * s for k, s in enumerate(sigma)) != len(sigma):
            raise ParameterError(f"{sigma} is not a weighted partition of {len(sigma)}")
        object.__setattr__(self, "sigma", sigma)

    @property
    def l(self) -> int:
        return len(self.sigma)


@dataclass(frozen=True)
class ExpansionSet:
    eps0: float
    a_terms: List[ScalarField]
    phi_terms: List[RealField]
    beta_terms: List[ScalarField] = field(default_factory=list)

    def __post_init__(self):
        fields_ = list(self.a_terms) + list(self.phi_terms) + list(self.beta_terms)
        if not fields_:
            raise ArityError("an expansion needs at least a_0 and phi_0")
        grid = fields_[0].grid
        if any(f.grid != grid for f in fields_):
            raise ParameterError("expansion terms live on different grids")
        if len(self.phi_terms) < len(self.a_terms):
            raise ArityError(
                f"need phi_0..phi_N for a_0..a_N, got {len(self.phi_terms)} phases for {len(self.a_terms)} amplitudes"
            )
        if len(self.beta_terms) > len(self.phi_terms) - 1:
            raise ArityError("beta_j needs phi_(j+1)")

    @property
    def grid(self) -> GridSpec:
        return self.a_terms[0].grid

    @property
    def order(self) -> int:
        return len(self.a_terms) - 1


@dataclass(frozen=True)
class ConvergenceReport:
    eps_values: List[float]
    errors: List[float]
    fitted_order: float
    intercept: float
    residual: float
    flagged: bool = False

    def rows(self) -> List[Tuple[float, float, float, float]]:
        return [(e, err, self.fitted_order, self.residual) for e, err in zip(self.eps_values, self.errors)]


@dataclass(frozen=True)
class CascadeState:
    t: float
    a1: ScalarField
    v1: VectorField2
    phi1: RealField


# -----------------------------
# Weighted partitions and beta_j
# -----------------------------
def _partitions(remaining: int, k: int, l: int, prefix: Tuple[int, ...]):
    if k > l:
        if remaining == 0:
            yield prefix
        return
    for count in range(remaining // k, -1, -1):
        yield from _partitions(remaining - k * count, k + 1, l, prefix + (count,))


def weighted_partitions(l: int) -> List[WeightedPartition]:
    """All sigma with sum k * sigma_k = l, in descending lexicographic order."""
    if l < 1:
        raise ParameterError(f"weighted partitions need l >= 1, got {l}")
    return [WeightedPartition(sigma) for sigma in _partitions(l, 1, l, ())]


def _phase_product(sigma: Tuple[int, ...], phi_terms: Sequence[RealField]) -> np.ndarray:
    out = np.ones(phi_terms[0].grid.shape, dtype=complex)
    for k, count in enumerate(sigma, start=1):
        if count:
            out = out * (1j * phi_terms[k + 1].values) ** count / math.factorial(count)
    return out


def assemble_beta(j: int, a_terms: Sequence[ScalarField], phi_terms: Sequence[RealField]) -> ScalarField:
    """
    beta_j = e^{i phi_1} ( a_j + sum_{l=1..j} a_{j-l} sum_{sigma |- l} prod_k (i phi_{k+1})^sigma_k / sigma_k! )

    ``phi_terms`` is indexed from phi_0, so beta_j needs phi_terms[1..j+1].
    """
    if j < 0:
        raise ParameterError(f"beta index must be >= 0, got {j}")
    if len(a_terms) < j + 1:
        raise ArityError(f"beta_{j} needs a_0..a_{j}, got {len(a_terms)} amplitude terms")
    if len(phi_terms) < j + 2:
        raise ArityError(f"beta_{j} needs phi_1..phi_{j + 1}, got {len(phi_terms)} phase terms")
    grid = a_terms[0].grid
    inner = np.array(a_terms[j].values, dtype=complex)
    for l in range(1, j + 1):
        weight = sum(_phase_product(p.sigma, phi_terms) for p in weighted_partitions(l))
        inner = inner + a_terms[j - l].values * weight
    return ScalarField(grid, np.exp(1j * phi_terms[1].values) * inner)


def build_expansion(eps0: float, a_terms: Sequence[ScalarField], phi_terms: Sequence[RealField],
                    n_beta: Optional[int] = None) -> ExpansionSet:
    """ExpansionSet with beta_0..beta_(n_beta-1) assembled (as many as the phases allow by default)."""
    if n_beta is None:
        n_beta = min(len(a_terms), len(phi_terms) - 1)
    betas = [assemble_beta(j, a_terms, phi_terms) for j in range(n_beta)]
    return ExpansionSet(eps0=float(eps0), a_terms=list(a_terms), phi_terms=list(phi_terms), beta_terms=betas)


# -----------------------------
# Corrector extraction
# -----------------------------
def _check_nodes(eps: Sequence[float]) -> None:
    positive = [e for e in eps if e > 0]
    for big, small in zip(positive, positive[1:]):
        if big / small < MIN_NODE_RATIO:
            raise ConditioningError(
                f"eps nodes {big} and {small} are closer than ratio {MIN_NODE_RATIO}; the fit is ill-conditioned"
            )


def extract_correctors(
    runs: Mapping[float, HydroState],
    order: int,
    Phi: Optional[RealField] = None,
    disk_fraction: float = 0.8,
) -> ExpansionSet:
    """
    Pointwise polynomial fit a^eps = sum_j eps^j a_j (and the same for phi) over the runs.

    Phases are fitted relative to the initial phase ``Phi`` (zero if omitted). An eps = 0
    run is accepted as a node; with more nodes than unknowns the fit is least squares.
    Corrections a_j, phi_j for j >= 1 are kept on the disk |x| <= disk_fraction * L only.
    """
    if order < 0:
        raise ParameterError(f"order must be >= 0, got {order}")
    eps = sorted((float(e) for e in runs), reverse=True)
    if len(eps) < order + 1:
        raise ArityError(f"order {order} needs at least {order + 1} distinct eps runs, got {len(eps)}")
    if any(e < 0 for e in eps):
        raise ParameterError("eps values must be >= 0")
    _check_nodes(eps)
    states = [runs[e] for e in eps]
    grid = states[0].grid
    t = states[0].t
    for e, s in zip(eps, states):
        if s.grid != grid:
            raise ParameterError(f"run at eps={e} lives on a different grid")
        if not math.isclose(s.t, t, rel_tol=1e-9, abs_tol=1e-12):
            raise ParameterError(f"run at eps={e} is at t={s.t}, expected t={t}")

    V = np.vander(np.array(eps), order + 1, increasing=True)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise ConditioningError(f"Vandermonde condition number {cond:.3e} too large")
    base = np.zeros(grid.shape) if Phi is None else Phi.values
    a_data = np.stack([s.a.values.ravel() for s in states])
    phi_data = np.stack([(s.phi.values - base).ravel() for s in states])
    a_coef = np.linalg.lstsq(V, a_data, rcond=None)[0]
    phi_coef = np.linalg.lstsq(V, phi_data, rcond=None)[0]

    inside = grid.radius() <= disk_fraction * grid.half_width
    a_terms, phi_terms = [], []
    for j in range(order + 1):
        a_j = a_coef[j].reshape(grid.shape)
        phi_j = phi_coef[j].reshape(grid.shape)
        if j == 0:
            phi_j = phi_j + base
        else:
            a_j = np.where(inside, a_j, 0.0)
            phi_j = np.where(inside, phi_j, 0.0)
        a_terms.append(ScalarField(grid, a_j))
        phi_terms.append(RealField(grid, phi_j))
    logger.info(f"extracted order-{order} correctors from eps={eps} (cond={cond:.3g})")
    return build_expansion(eps[0], a_terms, phi_terms)


# -----------------------------
# First-order cascade
# -----------------------------
def _linear_stage(a0, v01, v02, a1, v11, v12, grid: GridSpec, cfg: SolverConfig):
    da0_1, da0_2 = grad_values(a0, grid)
    da1_1, da1_2 = grad_values(a1, grid)
    transport = (
        -(v01 * da1_1 + v02 * da1_2)
        - (v11 * da0_1 + v12 * da0_2)
        - 0.5 * a1 * div_values(v01, v02, grid)
        - 0.5 * a0 * div_values(v11, v12, grid)
    )
    pairing = v01 * v11 + v02 * v12
    if cfg.dealias:
        transport = dealias_values(transport, grid)
        pairing = dealias_values(pairing, grid)
    da1 = transport + 0.5j * laplacian_values(a0, grid)
    q1 = pairing
    if cfg.lam != 0:
        rho1 = 2.0 * np.real(a0 * np.conj(a1))
        P1 = potential_values(rho1, grid, cfg.poisson_path)
        q1 = q1 + cfg.lam * tapered_potential_values(P1, rho1, grid)
    g1, g2 = grad_values(q1, grid)
    return da1, -g1, -g2, q1


def first_order_cascade(
    limit_run: Sequence[HydroState],
    cfg: SolverConfig,
    A1: Optional[ScalarField] = None,
    tolerance: float = 1e-8,
) -> List[CascadeState]:
    """
    Integrate the eps^1 correction (a_1, v_1 = grad phi_1, phi_1) around the eps = 0 run.

        da1/dt = -v0.grad a1 - v1.grad a0 - a1 div v0 / 2 - a0 div v1 / 2 + (i/2) Delta a0
        dv1/dt = -grad( v0.v1 + lam P[2 Re(a0 conj a1)] ),   dphi1/dt = -( v0.v1 + lam P[...] )

    The limit fields are integrated jointly (RK4 needs them at stage times) from the first
    sample of ``limit_run``; the recomputed samples must reproduce ``limit_run`` to
    ``tolerance`` relative L^2, otherwise DependencyError. a_1(0) = A1 (zero if omitted).
    """
    if not limit_run:
        raise DependencyError("first-order cascade needs the eps = 0 run")
    start = limit_run[0]
    if start.t != 0.0:
        raise DependencyError(f"limit run must start at t = 0, starts at t={start.t}")
    grid = start.grid
    limit_cfg = replace(cfg, epsilon=0.0)
    dt = limit_cfg.step
    wanted = limit_cfg.sample_steps()
    if len(wanted) != len(limit_run):
        raise DependencyError(
            f"limit run has {len(limit_run)} samples, configuration expects {len(wanted)}"
        )
    reference = dict(zip(wanted, limit_run))

    a0 = start.a.values
    v01, v02 = start.v.components
    a1 = np.zeros(grid.shape, dtype=complex) if A1 is None else np.array(A1.values, dtype=complex)
    v11 = np.zeros(grid.shape)
    v12 = np.zeros(grid.shape)
    phi1 = np.zeros(grid.shape)
    out = [CascadeState(0.0, ScalarField(grid, a1), VectorField2(grid, (v11, v12)), RealField(grid, phi1))]

    def rates(a0_, v01_, v02_, a1_, v11_, v12_):
        k0 = _stage(a0_, v01_, v02_, grid, limit_cfg)
        da1, dv11, dv12, q1 = _linear_stage(a0_, v01_, v02_, a1_, v11_, v12_, grid, limit_cfg)
        return (k0.da, k0.dv1, k0.dv2, da1, dv11, dv12), q1

    k1, q_start = rates(a0, v01, v02, a1, v11, v12)
    for step in range(1, limit_cfg.n_steps + 1):
        y = (a0, v01, v02, a1, v11, v12)
        k2, _ = rates(*(yi + 0.5 * dt * ki for yi, ki in zip(y, k1)))
        k3, _ = rates(*(yi + 0.5 * dt * ki for yi, ki in zip(y, k2)))
        k4, _ = rates(*(yi + dt * ki for yi, ki in zip(y, k3)))
        a0, v01, v02, a1, v11, v12 = (
            yi + (dt / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
            for yi, c1, c2, c3, c4 in zip(y, k1, k2, k3, k4)
        )
        k1, q_end = rates(a0, v01, v02, a1, v11, v12)
        phi1 = phi1 - 0.5 * dt * (q_start + q_end)
        q_start = q_end
        if not np.all(np.isfinite(a1)):
            raise DependencyError(f"cascade diverged at step {step}")
        if step in reference:
            ref = reference[step].a.values
            scale = max(float(np.linalg.norm(ref)), 1e-300)
            mismatch = float(np.linalg.norm(a0 - ref)) / scale
            if mismatch > tolerance:
                raise DependencyError(
                    f"limit run does not match the configuration at t={step * dt:.6g} (relative mismatch {mismatch:.3e})"
                )
            out.append(
                CascadeState(step * dt, ScalarField(grid, a1), VectorField2(grid, (v11, v12)), RealField(grid, phi1))
            )
    logger.info(f"first-order cascade done: {limit_cfg.n_steps} steps, lam={cfg.lam}")
    return out


# -----------------------------
# Errors and rates
# -----------------------------
def wkb_error(run: Union[WaveState, HydroState], expansion: ExpansionSet, N: int, epsilon: float) -> float:
    """|| u^eps exp(-i phi_0 / eps) - sum_{j<N} eps^j beta_j ||_{L^2}."""
    if not epsilon > 0:
        raise ParameterError(f"wkb_error needs eps > 0, got {epsilon}")
    if N < 1 or N > len(expansion.beta_terms):
        raise ArityError(f"expansion carries {len(expansion.beta_terms)} beta terms, asked for N={N}")
    grid = expansion.grid
    phi0 = expansion.phi_terms[0].values
    if isinstance(run, HydroState):
        # a exp(i (phi - phi0) / eps) avoids forming the large phase phi / eps
        modulated = run.a.values * np.exp(1j * (run.phi.values - phi0) / epsilon)
    else:
        modulated = run.u.values * np.exp(-1j * phi0 / epsilon)
    approx = sum(epsilon ** j * expansion.beta_terms[j].values for j in range(N))
    diff = modulated - approx
    return float(np.sqrt(np.sum(np.abs(diff) ** 2) * grid.cell_area))


def fit_convergence_rate(pairs: Union[Sequence[Tuple[float, float]], Dict[float, float]]) -> ConvergenceReport:
    """Least-squares slope of log(error) against log(eps); residual is the RMS log misfit."""
    items = list(pairs.items()) if isinstance(pairs, dict) else list(pairs)
    if len(items) < 3:
        raise ArityError(f"need at least 3 (eps, error) pairs, got {len(items)}")
    items.sort(key=lambda p: p[0], reverse=True)
    eps = np.array([float(p[0]) for p in items])
    err = np.array([float(p[1]) for p in items])
    if np.any(eps <= 0):
        raise ParameterError("eps values must be > 0")
    if np.any(err <= 0) or not np.all(np.isfinite(err)):
        raise ParameterError("errors must be finite and > 0")
    if np.any(np.diff(eps) >= 0):
        raise ParameterError("eps values must be distinct")
    x, y = np.log(eps), np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    flagged = abs(slope) < FLAG_ORDER or residual > FLAG_RESIDUAL
    if flagged:
        logger.warning(f"convergence fit flagged: order={slope:.3f}, residual={residual:.3f}")
    return ConvergenceReport(
        eps_values=eps.tolist(),
        errors=err.tolist(),
        fitted_order=float(slope),
        intercept=float(intercept),
        residual=residual,
        flagged=bool(flagged),
    )
