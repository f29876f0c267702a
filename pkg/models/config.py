# models/config.py
"""
Run configuration: a flat key = value text file with dotted keys and # comments.

    grid.L = 12
    grid.n = 256
    solver.epsilon = 0.25
    sweep.eps = 0.4, 0.2, 0.1, 0.05

Values are coerced to the type of the key's default. Unknown keys are rejected.
"""

import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Tuple

from models.dynamics import SolverConfig
from models.errors import ConfigError, SP2DError
from models.grid import GridSpec, build_grid

__all__ = [
    "DEFAULTS",
    "DataConfig",
    "ExperimentConfig",
    "parse_config_text",
    "load_config",
    "config_from_mapping",
]

logger = logging.getLogger(__name__)

AMPLITUDES = ("gaussian", "ring", "dipole")
PHASES = ("zero", "neglog")

DEFAULTS: Dict[str, Any] = {
    "grid.L": 12.0,
    "grid.n": 128,
    "solver.epsilon": 1.0,
    "solver.lambda": 1.0,
    "solver.dt": 2e-4,
    "solver.T": 0.3,
    "solver.dealias": True,
    "solver.poisson_path": "fft",
    "solver.samples": 10,
    "data.amplitude": "gaussian",
    "data.center": (0.0, 0.0),
    "data.sigma": 1.0,
    "data.mass": 1.0,
    "data.ring_radius": 3.0,
    "data.separation": 2.0,
    "data.phase": "zero",
    "data.corrector": 0.5,
    "sweep.eps": (0.4, 0.2, 0.1, 0.05),
    "wkb.order": 1,
    "continuity.delta": 1e-3,
    "continuity.s": 2.0,
    "output.dir": "runs",
}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


# -----------------------------
# Parsing
# -----------------------------
def _coerce(key: str, raw: Any) -> Any:
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in _TRUE:
                return True
            if text in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, tuple):
            if isinstance(raw, str):
                parts = [p for p in (s.strip() for s in raw.split(",")) if p]
            elif isinstance(raw, (list, tuple)):
                parts = list(raw)
            else:
                parts = [raw]
            return tuple(float(p) for p in parts)
        if isinstance(default, int):
            value = float(raw)
            if value != int(value):
                raise ValueError(f"not an integer: {raw!r}")
            return int(value)
        if isinstance(default, float):
            return float(raw)
        return str(raw).strip()
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{key}: {e}")


def parse_config_text(text: str) -> Dict[str, Any]:
    """Parse key = value lines; returns only the keys present, coerced."""
    values: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            logger.warning(f"line {lineno}: {key} set twice, last value wins")
        values[key] = _coerce(key, raw)
    return values


# -----------------------------
# Typed configuration
# -----------------------------
@dataclass(frozen=True)
class DataConfig:
    amplitude: str = "gaussian"
    center: Tuple[float, float] = (0.0, 0.0)
    sigma: float = 1.0
    mass: float = 1.0
    ring_radius: float = 3.0
    separation: float = 2.0
    phase: str = "zero"
    corrector: float = 0.5


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec
    solver: SolverConfig
    data: DataConfig
    sweep: Tuple[float, ...]
    order: int = 1
    continuity_delta: float = 1e-3
    continuity_s: float = 2.0
    output_dir: str = "runs"

    def to_dict(self) -> Dict[str, Any]:
        """Flat dotted-key view; feeding it back to config_from_mapping rebuilds the config."""
        return {
            "grid.L": self.grid.half_width,
            "grid.n": self.grid.n,
            "solver.epsilon": self.solver.epsilon,
            "solver.lambda": self.solver.lam,
            "solver.dt": self.solver.dt,
            "solver.T": self.solver.T,
            "solver.dealias": self.solver.dealias,
            "solver.poisson_path": self.solver.poisson_path,
            "solver.samples": self.solver.samples,
            "data.amplitude": self.data.amplitude,
            "data.center": list(self.data.center),
            "data.sigma": self.data.sigma,
            "data.mass": self.data.mass,
            "data.ring_radius": self.data.ring_radius,
            "data.separation": self.data.separation,
            "data.phase": self.data.phase,
            "data.corrector": self.data.corrector,
            "sweep.eps": list(self.sweep),
            "wkb.order": self.order,
            "continuity.delta": self.continuity_delta,
            "continuity.s": self.continuity_s,
            "output.dir": self.output_dir,
        }


def config_from_mapping(overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Defaults updated with ``overrides`` (dotted keys; raw strings or JSON values)."""
    values = dict(DEFAULTS)
    for key, raw in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _coerce(key, raw)

    if values["data.amplitude"] not in AMPLITUDES:
        raise ConfigError(f"data.amplitude must be one of {AMPLITUDES}, got {values['data.amplitude']!r}")
    if values["data.phase"] not in PHASES:
        raise ConfigError(f"data.phase must be one of {PHASES}, got {values['data.phase']!r}")
    if len(values["data.center"]) != 2:
        raise ConfigError(f"data.center needs two coordinates, got {values['data.center']}")
    sweep = values["sweep.eps"]
    if not sweep or any(e <= 0 for e in sweep) or any(b >= a for a, b in zip(sweep, sweep[1:])):
        raise ConfigError(f"sweep.eps must be positive and strictly decreasing, got {sweep}")
    if values["wkb.order"] < 1:
        raise ConfigError(f"wkb.order must be >= 1, got {values['wkb.order']}")
    if values["data.sigma"] <= 0 or values["data.mass"] <= 0:
        raise ConfigError("data.sigma and data.mass must be positive")

    try:
        grid = build_grid(values["grid.L"], values["grid.n"])
        solver = SolverConfig(
            epsilon=values["solver.epsilon"],
            lam=values["solver.lambda"],
            dt=values["solver.dt"],
            T=values["solver.T"],
            dealias=values["solver.dealias"],
            poisson_path=values["solver.poisson_path"],
            samples=values["solver.samples"],
        )
    except SP2DError as e:
        raise ConfigError(str(e))

    return ExperimentConfig(
        grid=grid,
        solver=solver,
        data=DataConfig(
            amplitude=values["data.amplitude"],
            center=tuple(values["data.center"]),
            sigma=values["data.sigma"],
            mass=values["data.mass"],
            ring_radius=values["data.ring_radius"],
            separation=values["data.separation"],
            phase=values["data.phase"],
            corrector=values["data.corrector"],
        ),
        sweep=tuple(sweep),
        order=values["wkb.order"],
        continuity_delta=values["continuity.delta"],
        continuity_s=values["continuity.s"],
        output_dir=values["output.dir"],
    )


def load_config(path: Optional[str] = None) -> ExperimentConfig:
    """Read a config file (defaults only when path is None)."""
    if path is None:
        return config_from_mapping({})
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        values = parse_config_text(fh.read())
    logger.info(f"loaded {len(values)} settings from {path}")
    return config_from_mapping(values)
