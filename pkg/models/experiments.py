# models/experiments.py
"""
Experiment presets: each one runs solvers for a configuration, evaluates its checks and
writes field dumps, CSV manifests and ``summary.json`` into one run directory.

Artifacts depend on the configuration only (no timings, no randomness), so identical
configurations reproduce them byte for byte.
"""

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from models.config import ExperimentConfig
from models.diagnostics import (
    curl_residual,
    energy_functional,
    hs_norm,
    mass,
    relative_drift,
    truncated_weight,
    weight_identity_residual,
    weighted_moment,
)
from models.dynamics import (
    HydroState,
    cfl_limit,
    evolve_hydro,
    hydro_step,
    phase_consistency,
    phase_growth,
)
from models.errors import ParameterError, SP2DError
from models.fieldio import write_csv, write_field, write_json
from models.grid import RealField, ScalarField, spectral_gradient
from models.initial_data import make_corrector, make_density, make_initial_data, unit_bump
from models.nls import (
    WaveState,
    check_resolution,
    evolve_nls,
    lift_hs_bound_terms,
    madelung_lift,
    madelung_project,
)
from models.poisson import (
    dipole_density,
    grad_potential,
    hessian_riesz,
    laplacian_residual,
    log_growth_ratio,
    neutrality_diagnostic,
    neutrality_slope,
    newtonian_potential,
    potential_freespace_fft,
    potential_logkernel_direct,
)
from models.wkb import (
    build_expansion,
    extract_correctors,
    first_order_cascade,
    fit_convergence_rate,
    wkb_error,
)

__all__ = [
    "PRESETS",
    "Check",
    "RunResult",
    "run_experiment",
    "run_id_for",
    "continuity_smoke",
    "sweep_map",
    "max_workers",
]

logger = logging.getLogger(__name__)

DIRECT_MAX_N = 48
LIFT_BOUND_CONSTANT = 50.0


# -----------------------------
# Bookkeeping
# -----------------------------
@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    comparison: str
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "value": _json_float(self.value),
            "tolerance": _json_float(self.tolerance),
            "comparison": self.comparison,
            "passed": self.passed,
        }


@dataclass
class RunResult:
    preset: str
    status: str
    exit_code: int
    run_dir: str
    summary: Dict[str, Any] = field(default_factory=dict)


def _json_float(value: float) -> Optional[float]:
    value = float(value)
    return value if math.isfinite(value) else None


class _Recorder:
    """Collects checks, metrics and artifacts of one run."""

    def __init__(self, run_dir: str):
        self.run_dir = run_dir
        self.checks: List[Check] = []
        self.metrics: Dict[str, Optional[float]] = {}
        self.artifacts: List[str] = []

    def check(self, name: str, value: float, tolerance: float, comparison: str = "<") -> Check:
        value = float(value)
        if comparison == "<":
            passed = value < tolerance
        elif comparison == "<=":
            passed = value <= tolerance
        elif comparison == ">=":
            passed = value >= tolerance
        else:
            raise ParameterError(f"unknown comparison {comparison!r}")
        passed = bool(passed and math.isfinite(value))
        result = Check(name, value, float(tolerance), comparison, passed)
        self.checks.append(result)
        log = logger.info if passed else logger.warning
        log(f"check {name}: {value:.6g} {comparison} {tolerance:.3g} -> {'pass' if passed else 'FAIL'}")
        return result

    def metric(self, name: str, value: float) -> None:
        self.metrics[name] = _json_float(value)

    def field(self, name: str, f) -> None:
        write_field(os.path.join(self.run_dir, name), f)
        self.artifacts.append(name)

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
        write_csv(os.path.join(self.run_dir, name), header, rows)
        self.artifacts.append(name)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# -----------------------------
# Concurrency
# -----------------------------
def max_workers() -> int:
    raw = os.environ.get("SP2D_THREADS")
    try:
        value = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        logger.warning(f"ignoring SP2D_THREADS={raw!r}")
        value = os.cpu_count() or 1
    return max(1, value)


def sweep_map(fn: Callable, items: Sequence) -> List:
    """fn over items on a thread pool capped by SP2D_THREADS; results in input order."""
    items = list(items)
    workers = min(max_workers(), len(items)) or 1
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _l2(values: np.ndarray, cell_area: float) -> float:
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * cell_area))


# -----------------------------
# poisson-check
# -----------------------------
def _poisson_check(cfg: ExperimentConfig, rec: _Recorder) -> None:
    grid = cfg.grid
    f = make_density(cfg)
    result = potential_freespace_fft(f)
    M = result.mass
    L = grid.half_width
    rec.metric("mass", M)
    rec.check("origin_normalization", abs(result.P.values[grid.origin_index]), 1e-12, "<=")

    if grid.n <= DIRECT_MAX_N:
        direct = potential_logkernel_direct(f)
        rec.check("direct_vs_fft_max", np.max(np.abs(direct.P.values - result.P.values)), 1e-6)
        grad_diff = max(
            np.max(np.abs(d - q)) for d, q in zip(direct.gradP.components, result.gradP.components)
        )
        rec.check("direct_vs_fft_grad_max", grad_diff, 1e-6)
    else:
        logger.info(f"direct quadrature skipped for n={grid.n} (> {DIRECT_MAX_N})")

    g1, g2 = result.gradP.components
    if cfg.data.amplitude == "gaussian" and tuple(cfg.data.center) == (0.0, 0.0):
        # |A|^2 = M/(pi s^2) exp(-r^2/s^2): enclosed mass M (1 - exp(-r^2/s^2))
        r = grid.radius()
        band = (r >= 1.0) & (r <= 0.5 * L)
        s2 = cfg.data.sigma ** 2
        oracle = M * (1.0 - np.exp(-r[band] ** 2 / s2)) / (2.0 * np.pi * r[band])
        measured = np.hypot(g1, g2)[band]
        rec.check("radial_oracle_rel", np.max(np.abs(measured - oracle) / oracle), 1e-3)
        X1, X2 = grid.coords()
        tangential = np.abs(X1 * g2 - X2 * g1)[band] / r[band]
        rec.metric("tangential_ratio", np.max(tangential) / np.max(measured))

    R = 0.8 * L
    ratio = log_growth_ratio(result, R)
    rec.metric("log_growth_ratio", ratio)
    rec.check("log_growth_bound", ratio, 1.1 * M / (2.0 * np.pi), "<=")

    newton = newtonian_potential(f)
    shift = newton.values - result.P.values
    scale = float(np.max(np.abs(newton.values)))
    rec.check("newtonian_shift_std", np.std(shift) / scale, 1e-8)
    rec.check("newtonian_shift_mean", abs(np.mean(shift) - newton.values[grid.origin_index]), 1e-8)

    h11, h12, h21, h22 = hessian_riesz(f)
    rec.check("hessian_trace", np.max(np.abs(h11.values + h22.values + f.values)), 1e-6)
    rec.check("hessian_symmetry", np.max(np.abs(h12.values - h21.values)), 0.0, "<=")
    rec.metric("laplacian_residual", laplacian_residual(f, result, 0.6))

    radii = np.linspace(0.3 * L, 0.9 * L, 9)
    charged = neutrality_diagnostic(f, radii)
    slope = neutrality_slope(charged)
    target = M * M / (2.0 * np.pi)
    rec.metric("neutrality_slope", slope)
    if cfg.data.amplitude != "ring":
        rec.check("neutrality_slope_rel", abs(slope - target) / target, 0.05)
    dipole = dipole_density(grid, cfg.data.separation, cfg.data.sigma)
    neutral = neutrality_diagnostic(dipole, radii)
    energies = [e for _, e in neutral]
    increments = np.diff(energies)[-3:]
    rec.check("dipole_increment_rel", float(np.max(np.abs(increments))) / energies[-1], 0.01)

    rec.csv(
        "neutrality.csv",
        ["R", "energy_charged", "energy_dipole"],
        [(R_, e1, e2) for (R_, e1), (_, e2) in zip(charged, neutral)],
    )
    rec.field("density.sp2d", f)
    rec.field("potential.sp2d", result.P)


# -----------------------------
# evolve
# -----------------------------
def _hydro_energy(state: HydroState, lam: float, epsilon: float) -> float:
    if epsilon <= 0:
        return float("nan")
    return energy_functional(madelung_lift(state.a, state.phi, epsilon), lam, epsilon)


def _weight_identity_slope(state: HydroState, cfg: ExperimentConfig, rec: _Recorder) -> None:
    solver = cfg.solver
    w = truncated_weight(state.grid)
    _, limit = cfl_limit(state.v)
    base = min(0.04, 0.25 * limit)
    steps = [base, base / 2.0, base / 4.0]
    residuals = []
    for delta in steps:
        before = hydro_step(state, solver, dt=-delta)
        after = hydro_step(state, solver, dt=delta)
        residuals.append(weight_identity_residual([before, state, after], w, solver.epsilon))
    rec.csv("weight_identity.csv", ["dt", "residual"], list(zip(steps, residuals)))
    if min(residuals) <= 0:
        rec.check("weight_identity_slope_err", float("inf"), 0.3, "<=")
        return
    slope = float(np.polyfit(np.log(steps), np.log(residuals), 1)[0])
    rec.metric("weight_identity_slope", slope)
    rec.check("weight_identity_slope_err", abs(slope - 2.0), 0.3, "<=")


def _evolve(cfg: ExperimentConfig, rec: _Recorder) -> None:
    solver = cfg.solver
    eps, lam = solver.epsilon, solver.lam
    A, Phi = make_initial_data(cfg, epsilon=eps)
    if eps > 0:
        check_resolution(eps, Phi)
    samples = evolve_hydro((A, Phi), solver)
    final = samples[-1]

    masses = [mass(s.a) for s in samples]
    curls = [curl_residual(s.v) for s in samples]
    energies = [_hydro_energy(s, lam, eps) for s in samples]
    rec.csv(
        "hydro_manifest.csv",
        ["t", "mass", "curl_residual", "energy"],
        [(s.t, m, c, e) for s, m, c, e in zip(samples, masses, curls, energies)],
    )
    rec.check("hydro_mass_drift", relative_drift(masses), 1e-8)
    rec.check("hydro_curl_residual", max(curls), 1e-6)
    rec.check("phase_consistency", phase_consistency(final), 1e-4)
    if solver.T > 0 and lam != 0:
        bound = solver.T * abs(lam) * masses[0] / (2.0 * np.pi)
        growth = phase_growth(final, Phi, 0.8 * cfg.grid.half_width)
        rec.metric("phase_growth", growth)
        rec.check("phase_growth_ratio", growth / bound, 1.15, "<=")
    _weight_identity_slope(samples[len(samples) // 2], cfg, rec)
    rec.field("hydro_a_T.sp2d", final.a)
    rec.field("hydro_phi_T.sp2d", final.phi)

    if eps <= 0:
        logger.info("eps = 0: wave solver and energy checks skipped")
        return
    u0 = madelung_lift(A, Phi, eps)
    waves = evolve_nls(u0, solver)
    wave_mass = [mass(s.u) for s in waves]
    wave_energy = [energy_functional(s.u, lam, eps) for s in waves]
    rec.csv("nls_manifest.csv", ["t", "mass", "energy"], [(s.t, m, e) for s, m, e in zip(waves, wave_mass, wave_energy)])
    rec.check("nls_mass_drift", relative_drift(wave_mass), 1e-12)
    rec.check("nls_energy_drift", relative_drift(wave_energy), 1e-4)
    rec.field("nls_u_T.sp2d", waves[-1].u)

    deltas = [10.0 * cfg.continuity_delta, cfg.continuity_delta, cfg.continuity_delta / 10.0]
    ratios = [continuity_smoke(cfg, d, base=waves[-1]) for d in deltas]
    rec.csv("continuity.csv", ["delta", "ratio"], list(zip(deltas, ratios)))
    if min(ratios) > 0:
        rec.check("continuity_ratio_spread", max(ratios) / min(ratios), 2.0, "<=")


# -----------------------------
# madelung-compare
# -----------------------------
def _madelung_member(args: Tuple[ExperimentConfig, float]) -> Dict[str, Any]:
    cfg, dt = args
    solver = replace(cfg.solver, dt=dt)
    eps = solver.epsilon
    A, Phi = make_initial_data(cfg, epsilon=eps)
    hydro = evolve_hydro((A, Phi), solver)[-1]
    wave = evolve_nls(madelung_lift(A, Phi, eps), solver, psi0=Phi)[-1]
    area = cfg.grid.cell_area
    lifted = madelung_lift(hydro.a, hydro.phi, eps)
    projected = madelung_project(wave.u, wave.psi, eps)
    return {
        "dt": solver.step,
        "hydro": hydro,
        "wave": wave,
        "lift_error": _l2(wave.u.values - lifted.values, area),
        "projection_error": _l2(projected.values - hydro.a.values, area),
    }


def _madelung_compare(cfg: ExperimentConfig, rec: _Recorder) -> None:
    solver = cfg.solver
    eps = solver.epsilon
    if eps <= 0:
        raise ParameterError("madelung-compare needs solver.epsilon > 0")
    A, Phi = make_initial_data(cfg, epsilon=eps)
    check_resolution(eps, Phi)
    coarse, fine = sweep_map(_madelung_member, [(cfg, solver.dt), (cfg, solver.dt / 2.0)])
    rec.csv(
        "madelung.csv",
        ["dt", "lift_error", "projection_error"],
        [(m["dt"], m["lift_error"], m["projection_error"]) for m in (coarse, fine)],
    )
    rec.check("madelung_lift_error", coarse["lift_error"], 1e-3)
    rec.check("hj_projection_error", coarse["projection_error"], 1e-3)
    if fine["lift_error"] > 0:
        rec.check("madelung_dt_ratio", coarse["lift_error"] / fine["lift_error"], 3.0, ">=")

    theta = 0.7
    rotated = evolve_nls(ScalarField(cfg.grid, np.exp(1j * theta) * madelung_lift(A, Phi, eps).values), solver)[-1]
    base_u = coarse["wave"].u.values
    rec.check("gauge_covariance", _l2(rotated.u.values - np.exp(1j * theta) * base_u, cfg.grid.cell_area), 1e-12)

    hydro = coarse["hydro"]
    lhs, bracket = lift_hs_bound_terms(hydro.a, hydro.phi, 3.0, eps)
    rec.metric("lift_hs_lhs", lhs)
    rec.metric("lift_hs_bracket", bracket)
    rec.check("lift_hs_bound", lhs / bracket, LIFT_BOUND_CONSTANT, "<=")
    rec.field("nls_u_T.sp2d", coarse["wave"].u)
    rec.field("hydro_a_T.sp2d", hydro.a)


# -----------------------------
# wkb-sweep
# -----------------------------
def _sweep_member(args: Tuple[ExperimentConfig, float]) -> List[HydroState]:
    cfg, eps = args
    solver = replace(cfg.solver, epsilon=eps)
    return evolve_hydro(make_initial_data(cfg, epsilon=eps), solver)


def _masked_rel(a: np.ndarray, b: np.ndarray, inside: np.ndarray) -> float:
    ref = float(np.linalg.norm(b[inside]))
    return float(np.linalg.norm((a - b)[inside])) / ref if ref > 0 else float(np.linalg.norm((a - b)[inside]))


def _wkb_sweep(cfg: ExperimentConfig, rec: _Recorder) -> None:
    solver = cfg.solver
    grid = cfg.grid
    N = cfg.order
    A0, Phi = make_initial_data(cfg, epsilon=0.0)

    # phase gradient bound over [0, T] for the resolution guard
    g1, g2 = grad_potential(RealField(grid, np.abs(A0.values) ** 2)).components
    p1, p2 = spectral_gradient(Phi).components
    gmax = float(np.max(np.hypot(p1, p2))) + solver.T * abs(solver.lam) * float(np.max(np.hypot(g1, g2)))
    for eps in cfg.sweep:
        check_resolution(eps, Phi, max_gradient=gmax)

    nodes = [0.0] + list(cfg.sweep)
    logger.info(f"wkb sweep over eps={nodes} on {min(max_workers(), len(nodes))} threads")
    runs = dict(zip(nodes, sweep_map(_sweep_member, [(cfg, e) for e in nodes])))
    limit = runs[0.0]
    finals = {e: run[-1] for e, run in runs.items()}

    cascade = first_order_cascade(limit, replace(solver, epsilon=0.0), A1=make_corrector(cfg))
    fit_order = len(nodes) - 2
    if fit_order < N + 1:
        raise ParameterError(f"wkb.order={N} needs at least {N + 3} sweep nodes including eps = 0")
    extracted = extract_correctors(finals, fit_order, Phi=Phi)

    a_terms = [limit[-1].a, cascade[-1].a1] + extracted.a_terms[2:N + 1]
    phi_terms = [limit[-1].phi, cascade[-1].phi1] + extracted.phi_terms[2:N + 2]
    expansion = build_expansion(cfg.sweep[0], a_terms, phi_terms, n_beta=N + 1)

    low = {e: wkb_error(finals[e], expansion, N, e) for e in cfg.sweep}
    high = {e: wkb_error(finals[e], expansion, N + 1, e) for e in cfg.sweep}
    report = fit_convergence_rate(low)
    report_high = fit_convergence_rate(high)
    rec.csv(f"convergence_N{N}.csv", ["eps", "error", "fitted_order", "residual"], report.rows())
    rec.csv(f"convergence_N{N + 1}.csv", ["eps", "error", "fitted_order", "residual"], report_high.rows())
    rec.metric("fitted_order", report.fitted_order)
    rec.metric("fitted_order_next", report_high.fitted_order)
    rec.check("wkb_order", report.fitted_order, 0.9 * N, ">=")
    improvement = max(high[e] / low[e] for e in cfg.sweep)
    rec.check("next_order_improves", improvement, 1.0, "<")

    inside = grid.radius() <= 0.8 * grid.half_width
    rec.check("a0_extrapolated_vs_limit", _l2(extracted.a_terms[0].values - limit[-1].a.values, grid.cell_area), 5e-3)
    rec.check(
        "a1_cascade_vs_extrapolated",
        _masked_rel(extracted.a_terms[1].values, cascade[-1].a1.values, inside),
        5e-2,
    )

    m0 = [weighted_moment(s.a, 1.0, 0) for s in limit]
    m1 = [weighted_moment(c.a1, 1.0, 1) for c in cascade]
    rec.csv("moments.csv", ["t", "moment_a0", "moment_a1"], [(s.t, x, y) for s, x, y in zip(limit, m0, m1)])
    rec.check("moment_a0_growth", max(m0) / m0[0], 3.0, "<=")
    if m1[0] > 0:
        rec.check("moment_a1_growth", max(m1) / m1[0], 3.0, "<=")
    else:
        logger.info("a_1 starts at zero; moment growth check for j = 1 skipped")

    rec.field("a0_T.sp2d", limit[-1].a)
    rec.field("a1_T.sp2d", cascade[-1].a1)
    rec.field("phi1_T.sp2d", cascade[-1].phi1)


# -----------------------------
# Public operations
# -----------------------------
PRESETS: Dict[str, Callable[[ExperimentConfig, _Recorder], None]] = {
    "poisson-check": _poisson_check,
    "evolve": _evolve,
    "madelung-compare": _madelung_compare,
    "wkb-sweep": _wkb_sweep,
}


def continuity_smoke(cfg: ExperimentConfig, delta: float, base: Optional[WaveState] = None) -> float:
    """
    ||u_1(T) - u_2(T)||_{H^(s-1)} / delta for u_2(0) = u_1(0) + delta * bump.

    The bump has unit H^(s-1) norm, so the free flow (lam = 0) gives exactly 1. ``base`` is
    an already computed final state of the unperturbed run.
    """
    solver = cfg.solver
    if solver.epsilon <= 0:
        raise ParameterError("continuity_smoke needs solver.epsilon > 0")
    s = cfg.continuity_s
    if s < 1:
        raise ParameterError(f"continuity.s must be >= 1, got {s}")
    if delta == 0:
        return 0.0
    A, Phi = make_initial_data(cfg, epsilon=solver.epsilon)
    u0 = madelung_lift(A, Phi, solver.epsilon)
    if base is None:
        base = evolve_nls(u0, solver)[-1]
    bump = unit_bump(cfg.grid, s - 1.0)
    perturbed = evolve_nls(ScalarField(cfg.grid, u0.values + delta * bump.values), solver)[-1]
    diff = ScalarField(cfg.grid, perturbed.u.values - base.u.values)
    return hs_norm(diff, s - 1.0) / abs(delta)


def run_experiment(preset: str, cfg: ExperimentConfig, out_dir: Optional[str] = None) -> RunResult:
    """
    Run a preset and write its artifacts plus ``summary.json`` into ``out_dir``
    (cfg.output_dir by default). Exit code 0 when every check passes, 1 otherwise.
    """
    if preset not in PRESETS:
        raise ParameterError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
    run_dir = out_dir or cfg.output_dir
    os.makedirs(run_dir, exist_ok=True)
    rec = _Recorder(run_dir)
    logger.info(f"preset {preset}: n={cfg.grid.n}, L={cfg.grid.half_width}, out={run_dir}")

    message = None
    try:
        PRESETS[preset](cfg, rec)
        status = "pass" if rec.passed else "fail"
    except (SP2DError, OSError) as e:
        # artifact writes happen inside the preset, so I/O failures land here too
        logger.error(f"preset {preset} aborted: {e}")
        status = "error"
        message = str(e)

    summary = {
        "preset": preset,
        "status": status,
        "message": message,
        "config": cfg.to_dict(),
        "checks": [c.to_dict() for c in rec.checks],
        "metrics": rec.metrics,
        "artifacts": rec.artifacts,
    }
    write_json(os.path.join(run_dir, "summary.json"), summary)
    exit_code = 0 if status == "pass" else 1
    logger.info(f"preset {preset} finished: {status}")
    return RunResult(preset=preset, status=status, exit_code=exit_code, run_dir=run_dir, summary=summary)


def run_id_for(preset: str, cfg: ExperimentConfig) -> str:
    """Stable identifier of (preset, configuration); the output directory does not enter it."""
    settings = {k: v for k, v in cfg.to_dict().items() if k != "output.dir"}
    payload = json.dumps({"preset": preset, "config": settings}, sort_keys=True)
    return f"{preset}-{hashlib.sha1(payload.encode('utf-8')).hexdigest()[:12]}"
