"""
Config - Run parameters of the solver

A configuration is a flat `key = value` text file with `#` comments. Values
can be overridden by PTCYL_<KEY> environment variables, which are also read
from a `.env` file in the working directory.

Example:
    # rotor-stator at Re = 100
    M = 4
    K = 24
    N = 24
    h = 2.0
    Re = 100
    dt = 0.01
    omega_top = 1.0
    mhd = off
"""

import dataclasses
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, Mapping, Optional, Tuple

from dotenv import dotenv_values

from .errors import ConfigError
from .spectral import PARITIES, BasisSpec

logger = logging.getLogger(__name__)

ENV_PREFIX = "PTCYL_"
TRUE_VALUES = ("on", "true", "yes", "1")
FALSE_VALUES = ("off", "false", "no", "0")


@dataclass(frozen=True)
class SolverConfig:
    """
    Resolved parameters of a run.

    Attributes:
        M, K, N: Azimuthal, axial and radial resolution
        h: Cylinder height (radius is 1)
        Re, Rm: Hydrodynamic and magnetic Reynolds numbers
        dt, steps: Time step and number of steps
        omega_top, omega_bottom: Disk angular velocities at z = +h/2, -h/2
        disk_smoothing: 0 for rigid disks, q > 0 for u_theta = omega r (1 - r^2q)
        mhd: Evolve the magnetic field as well
        threshold_zero, threshold_gap: Zero singular value detection
        condition_target: Warn above this scaled condition number
        image_tolerance: Largest accepted nullspace component of a residual
        residual_tolerance: Largest accepted relative residual after correction

    Rigid disks (disk_smoothing = 0) meet the fixed wall with a jump in
    u_theta at the corner circles. The tau rows drop the wall condition on
    the last Chebyshev function, so the wall trace of u_theta reaches the
    disk speed at the corners and maxBCresidual stays of order one. A
    smoothed profile vanishes at r = 1 and removes the jump.
    """

    M: int = 0
    K: int = 16
    N: int = 16
    h: float = 2.0
    Re: float = 100.0
    Rm: float = 100.0
    dt: float = 1e-2
    steps: int = 100
    omega_top: float = 1.0
    omega_bottom: float = 0.0
    mhd: bool = False
    threshold_zero: float = 1e-14
    threshold_gap: float = 1e3
    condition_target: float = 1e8
    image_tolerance: float = 1e-6
    residual_tolerance: float = 1e-9
    snapshot_every: int = 0
    spinup_steps: int = 0
    disk_smoothing: int = 0
    threads: int = 1
    seed: int = 0
    init_amplitude: float = 0.0
    output_dir: str = "output"
    cache_dir: str = ".ptcyl-cache"
    dtn_wall_points: int = 0
    dtn_disk_points: int = 0
    dtn_source_depth: float = 0.0

    def __post_init__(self):
        for name in ("h", "Re", "Rm", "dt"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.M < 0:
            raise ConfigError(f"M must be non-negative, got {self.M}")
        if self.K < 4:
            raise ConfigError(f"K must be at least 4, got {self.K}")
        if self.N < 3:
            raise ConfigError(f"N must be at least 3, got {self.N}")
        if self.steps < 0 or self.snapshot_every < 0 or self.spinup_steps < 0:
            raise ConfigError("steps, snapshot_every and spinup_steps must be non-negative")
        if self.condition_target < 1:
            raise ConfigError(f"condition_target must be >= 1, got {self.condition_target}")
        for name in ("threshold_zero", "threshold_gap", "image_tolerance", "residual_tolerance"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 <= self.disk_smoothing <= self.N - 2:
            raise ConfigError(
                f"disk_smoothing must lie in [0, {self.N - 2}], got {self.disk_smoothing}"
            )
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}")
        if self.dtn_source_depth < 0 or self.init_amplitude < 0:
            raise ConfigError("dtn_source_depth and init_amplitude must be non-negative")

    @property
    def basis_spec(self) -> BasisSpec:
        return BasisSpec(M=self.M, K=self.K, N=self.N, h=self.h)

    @property
    def thresholds(self) -> Dict[str, float]:
        return {
            "threshold_zero": self.threshold_zero,
            "threshold_gap": self.threshold_gap,
            "condition_target": self.condition_target,
            "image_tolerance": self.image_tolerance,
        }

    def modes(self) -> Iterator[Tuple[int, str]]:
        """Every retained (m, parity) block."""
        for m in self.basis_spec.modes:
            for parity in PARITIES:
                yield m, parity

    def replace(self, **changes: Any) -> "SolverConfig":
        return dataclasses.replace(self, **changes)


FIELDS = {f.name: f for f in dataclasses.fields(SolverConfig)}


def _coerce(name: str, raw: str) -> Any:
    kind = FIELDS[name].type
    text = raw.strip()
    try:
        if kind in (bool, "bool"):
            lowered = text.lower()
            if lowered in TRUE_VALUES:
                return True
            if lowered in FALSE_VALUES:
                return False
            raise ValueError(text)
        if kind in (int, "int"):
            return int(text)
        if kind in (float, "float"):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"Invalid value for {name}: {raw!r}") from exc
    return text


def parse_config(values: Mapping[str, Optional[str]]) -> SolverConfig:
    """Build a config from raw string values; unknown keys are errors."""
    kwargs: Dict[str, Any] = {}
    for key, raw in values.items():
        if key not in FIELDS:
            raise ConfigError(f"Unknown configuration key: {key}")
        if raw is None:
            raise ConfigError(f"Missing value for {key}")
        kwargs[key] = _coerce(key, raw)
    return SolverConfig(**kwargs)


def with_overrides(config: SolverConfig, values: Mapping[str, str]) -> SolverConfig:
    """Raw string overrides applied on top of a resolved config."""
    changes: Dict[str, Any] = {}
    for key, raw in values.items():
        if key not in FIELDS:
            raise ConfigError(f"Unknown configuration key: {key}")
        changes[key] = _coerce(key, raw)
    return config.replace(**changes)


def environment_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    """PTCYL_<KEY> entries from a .env file and the process environment (the latter wins)."""
    merged: Dict[str, Optional[str]] = {}
    if Path(".env").is_file():
        merged.update(dotenv_values(".env"))
    merged.update(os.environ if environ is None else environ)
    out = {}
    for key, value in merged.items():
        if key.startswith(ENV_PREFIX) and value is not None:
            name = key[len(ENV_PREFIX) :]
            if name not in FIELDS:
                raise ConfigError(f"Unknown configuration key in environment: {key}")
            out[name] = value
    return out


def load_config(
    path: Optional[str] = None, environ: Optional[Mapping[str, str]] = None
) -> SolverConfig:
    """
    Read a config file and apply environment overrides.

    Args:
        path: Config file; defaults only when None
        environ: Environment mapping (os.environ when None)

    Raises:
        ConfigError: on unknown keys or invalid values
    """
    values: Dict[str, Optional[str]] = {}
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"Config file not found: {path}")
        values.update(dotenv_values(path))
    overrides = environment_overrides(environ)
    if overrides:
        logger.debug("Environment overrides: %s", sorted(overrides))
    values.update(overrides)
    return parse_config(values)


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def dump_config(config: SolverConfig) -> str:
    """Every key in `key = value` form; floats keep 17 significant digits."""
    lines = ["# resolved ptcyl configuration"]
    for name in FIELDS:
        lines.append(f"{name} = {format_value(getattr(config, name))}")
    return "\n".join(lines) + "\n"


def canonical_payload(config: SolverConfig, keys: Tuple[str, ...]) -> Dict[str, str]:
    """Formatted values of the keys that determine a cached artefact."""
    return {key: format_value(getattr(config, key)) for key in keys}
