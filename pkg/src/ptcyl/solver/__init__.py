"""
ptcyl Solver - Spectral operators, time stepping and drivers

Structure:
- spectral, elliptic - Basis, transforms and tau solvers
- influence - Influence matrices and their regularisation
- hydro, magnetic, dtn - Velocity and magnetic tableaux, exterior DtN map
- integrator, functions - Run orchestration and subcommand functions
- hooks/ - Optional observers of a run (diagnostics, snapshots)

Usage (driver):
    from ptcyl.solver import Integrator, load_config

    integrator = Integrator(load_config("run.cfg"))
    context = integrator.run()

Usage (functions):
    from ptcyl.solver import precompute, validate

    records = precompute(config)
    ok = validate(config, ["spectral", "influence"])
"""

from .config import SolverConfig, dump_config, load_config, parse_config
from .context import RunContext
from .dtn import DtnMap, RingDensitySolver, build_dtn, harmonic_error, spherical_condition
from .elliptic import HelmholtzOperator, HorizontalPoisson, solve_helmholtz, solve_poisson_h
from .errors import (
    CacheIntegrityError,
    ConditioningError,
    ConfigError,
    DimensionError,
    DtnError,
    ImageSpaceError,
    InfluenceBuildError,
    SolvabilityError,
    SolverError,
    StepError,
)
from .functions import diagnose, diagnose_dtn, export_csv, precompute, precompute_dtn, run, validate
from .hydro import HydroStepper, HydroTableau, MagneticState, VelocityState, timestep
from .influence import InfluenceMatrix, apply_correction, build_influence_matrix, regularize
from .integrator import Integrator
from .magnetic import MagneticStepper, MagneticTableau
from .spectral import BasisSpec, PhysicalGrid, SpectralBasis, SpectralField, VectorFieldSlices
from .storage import ArtifactCache, read_snapshot, write_snapshot

__all__ = [
    # Drivers
    "Integrator",
    "RunContext",
    # Configuration
    "SolverConfig",
    "load_config",
    "parse_config",
    "dump_config",
    # Spectral core
    "BasisSpec",
    "SpectralBasis",
    "SpectralField",
    "VectorFieldSlices",
    "PhysicalGrid",
    "HelmholtzOperator",
    "HorizontalPoisson",
    "solve_helmholtz",
    "solve_poisson_h",
    # Influence matrices
    "InfluenceMatrix",
    "build_influence_matrix",
    "regularize",
    "apply_correction",
    # Time stepping
    "HydroTableau",
    "HydroStepper",
    "MagneticTableau",
    "MagneticStepper",
    "VelocityState",
    "MagneticState",
    "timestep",
    # Exterior
    "DtnMap",
    "RingDensitySolver",
    "build_dtn",
    "harmonic_error",
    "spherical_condition",
    # Storage
    "ArtifactCache",
    "read_snapshot",
    "write_snapshot",
    # Subcommand functions
    "precompute",
    "precompute_dtn",
    "run",
    "diagnose",
    "diagnose_dtn",
    "export_csv",
    "validate",
    # Errors
    "SolverError",
    "ConfigError",
    "DimensionError",
    "SolvabilityError",
    "ConditioningError",
    "DtnError",
    "InfluenceBuildError",
    "ImageSpaceError",
    "StepError",
    "CacheIntegrityError",
]
