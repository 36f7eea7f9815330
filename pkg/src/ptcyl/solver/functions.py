"""
Modular functions behind the command-line subcommands

Each function is independent and can be called separately with a resolved
SolverConfig. Outputs are written below config.output_dir.

This module uses Integrator internally to avoid code duplication.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .config import SolverConfig, dump_config
from .context import RunContext
from .dtn import HARMONICS, harmonic_error, spherical_conditioning
from .errors import DimensionError
from .hooks import DiagnosticsLog, HookBase, SnapshotWriter
from .influence import InfluenceMatrix
from .integrator import Integrator, PrecomputeRecord
from .spectral import SpectralBasis
from .storage import (
    ArtifactCache,
    export_mode_csv,
    read_snapshot,
    states_from_snapshot,
    write_csv,
)
from .validation import SUITES, run_suites

logger = logging.getLogger(__name__)

RECORD_COLUMNS = (
    "kind",
    "m",
    "parity",
    "size",
    "zero_count",
    "condition_raw",
    "condition_scaled",
    "cached",
)


def _write_records(path: Path, records: Sequence[PrecomputeRecord]) -> Path:
    rows = [
        [getattr(record, name) for name in RECORD_COLUMNS[:-1]] + [int(record.cached)]
        for record in records
    ]
    write_csv(path, RECORD_COLUMNS, rows)
    return path


# =============================================================================
# PRECOMPUTE
# =============================================================================


def precompute(
    config: SolverConfig, cache: Optional[ArtifactCache] = None
) -> List[PrecomputeRecord]:
    """
    Build or load every influence matrix of the configuration.

    DtN maps and magnetic influence matrices are included when config.mhd is
    set. A report is written to <output_dir>/precompute.csv.

    Returns:
        One record per artefact

    Example:
        records = precompute(load_config("run.cfg"))
        print(sum(r.cached for r in records), "cache hits")
    """
    records = Integrator(config, cache=cache).precompute()
    _write_records(Path(config.output_dir) / "precompute.csv", records)
    return records


def precompute_dtn(
    config: SolverConfig, cache: Optional[ArtifactCache] = None
) -> List[PrecomputeRecord]:
    """Build or load the DtN maps alone (report in <output_dir>/precompute_dtn.csv)."""
    integrator = Integrator(config, cache=cache)
    integrator.dtn_maps()
    _write_records(Path(config.output_dir) / "precompute_dtn.csv", integrator.records)
    return integrator.records


# =============================================================================
# RUN
# =============================================================================


def run(
    config: SolverConfig,
    hooks: Optional[List[HookBase]] = None,
    restart: Optional[Path] = None,
    cache: Optional[ArtifactCache] = None,
) -> RunContext:
    """
    Time integration with the default diagnostics and snapshot hooks.

    Args:
        config: Resolved configuration
        hooks: Hooks replacing the defaults
        restart: Snapshot to start from instead of the seeded state
        cache: Artefact cache (config.cache_dir when None)

    Returns:
        Final run context
    """
    if hooks is None:
        hooks = [DiagnosticsLog(), SnapshotWriter(every=config.snapshot_every)]
    integrator = Integrator(config, hooks=hooks, cache=cache)

    velocity = magnetic = None
    if restart is not None:
        spec, fields = read_snapshot(restart)
        if spec != config.basis_spec:
            raise DimensionError(
                f"Snapshot {restart} has resolution {spec}, run uses {config.basis_spec}"
            )
        velocity = states_from_snapshot(integrator.basis, fields)
        if config.mhd and "psi_B" in fields:
            magnetic = states_from_snapshot(integrator.basis, fields, magnetic=True)
        logger.info("Restarting from %s", restart)

    output = Path(config.output_dir)
    output.mkdir(parents=True, exist_ok=True)
    (output / "config.resolved").write_text(dump_config(config))

    context = integrator.run(velocity, magnetic)
    logger.info(
        "Run finished at step %d (t=%.4f), %d files written",
        context.step,
        context.t,
        len(context.written),
    )
    return context


# =============================================================================
# DIAGNOSTICS
# =============================================================================


def _influence_rows(kind: str, matrix: InfluenceMatrix) -> Dict[str, list]:
    report = matrix.report
    summary = [
        kind,
        matrix.m,
        matrix.parity,
        matrix.matrix.shape[0],
        matrix.matrix.shape[1],
        report.zero_count,
        float(report.gap_ratio),
        int(report.threshold_only),
        report.condition_raw,
        report.condition_row,
        report.condition_block,
        report.condition_scaled,
    ]
    spectra = [
        [kind, matrix.m, matrix.parity, i, raw, scaled] for i, raw, scaled in report.spectrum_rows()
    ]
    blocks = [
        [kind, matrix.m, matrix.parity, matrix.rows.names[i], matrix.cols.names[j], float(value)]
        for (i, j), value in np.ndenumerate(matrix.block_norms)
    ]
    return {"summary": [summary], "spectra": spectra, "blocks": blocks}


def diagnose(config: SolverConfig, cache: Optional[ArtifactCache] = None) -> List[Path]:
    """
    Regularisation reports of every influence matrix.

    Writes influence_report.csv (condition numbers per stage), influence_spectra.csv
    (raw and scaled singular values) and influence_blocks.csv (block norms).
    """
    integrator = Integrator(config, cache=cache)
    integrator.precompute()
    matrices = [("hydro", m) for m in integrator.hydro_stepper().influences.values()]
    if config.mhd:
        matrices += [("magnetic", m) for m in integrator.magnetic_stepper().influences.values()]

    collected: Dict[str, list] = {"summary": [], "spectra": [], "blocks": []}
    for kind, matrix in matrices:
        for name, rows in _influence_rows(kind, matrix).items():
            collected[name].extend(rows)

    output = Path(config.output_dir)
    paths = [
        output / "influence_report.csv",
        output / "influence_spectra.csv",
        output / "influence_blocks.csv",
    ]
    write_csv(
        paths[0],
        (
            "kind",
            "m",
            "parity",
            "rows",
            "cols",
            "zero_count",
            "gap_ratio",
            "threshold_only",
            "condition_raw",
            "condition_row",
            "condition_block",
            "condition_scaled",
        ),
        collected["summary"],
    )
    spectra_header = ("kind", "m", "parity", "index", "gamma_raw", "gamma_scaled")
    write_csv(paths[1], spectra_header, collected["spectra"])
    blocks_header = ("kind", "m", "parity", "row_block", "col_block", "norm")
    write_csv(paths[2], blocks_header, collected["blocks"])
    return paths


def diagnose_dtn(
    config: SolverConfig,
    resolutions: Sequence[int] = (8, 16, 32),
    spherical_counts: Sequence[int] = (4, 8, 12, 16, 20),
) -> List[Path]:
    """
    DtN accuracy against analytic exterior harmonics and the spherical-harmonic conditioning.

    Each resolution n uses n wall points and n // 2 + 2 points per disk.
    Writes dtn_convergence.csv and dtn_spherical.csv.
    """
    rows = []
    for name in HARMONICS:
        for n in resolutions:
            wall, disk = int(n), int(n) // 2 + 2
            error = harmonic_error(name, config.h, wall, disk, config.dtn_source_depth)
            logger.info("DtN %s n=%d: relative error %.3e", name, n, error)
            rows.append([name, HARMONICS[name], wall, disk, error])

    spherical = []
    for m in sorted({0, 1} | set(config.basis_spec.modes)):
        for count, condition in spherical_conditioning(m, config.h, spherical_counts).items():
            spherical.append([m, count, condition])

    output = Path(config.output_dir)
    paths = [output / "dtn_convergence.csv", output / "dtn_spherical.csv"]
    write_csv(paths[0], ("harmonic", "m", "wall_points", "disk_points", "error"), rows)
    write_csv(paths[1], ("m", "degrees", "condition"), spherical)
    return paths


# =============================================================================
# EXPORT
# =============================================================================


def export_csv(
    snapshot: Path,
    output: Path,
    field: str = "psi_u",
    m: int = 0,
    parity: str = "s",
    points: int = 33,
    theta: float = 0.0,
) -> Path:
    """
    Export one block of a snapshot field on a uniform (r, z) grid.

    Args:
        snapshot: Snapshot file written by a run
        output: CSV path (columns r, z, value)
        field: Field name (psi_u, phi_u, psi_B or phi_B)
        m: Azimuthal wavenumber
        parity: Block parity
        points: Grid points per direction
        theta: Azimuth at which the mode is evaluated
    """
    spec, fields = read_snapshot(snapshot)
    if field not in fields:
        raise DimensionError(f"Field {field!r} not in {snapshot}; available: {sorted(fields)}")
    if (m, parity) not in fields[field]:
        raise DimensionError(f"Block (m={m}, p={parity}) not in {snapshot}")
    basis = SpectralBasis(spec)
    r = np.linspace(0.0, 1.0, points)
    z = np.linspace(-0.5 * spec.h, 0.5 * spec.h, points)
    export_mode_csv(output, basis, fields[field][(m, parity)], r, z, theta)
    logger.info("Exported %s (m=%d, p=%s) to %s", field, m, parity, output)
    return Path(output)


# =============================================================================
# VALIDATION
# =============================================================================


def validate(config: SolverConfig, suites: Optional[Sequence[str]] = None) -> bool:
    """
    Run validation suites and write <output_dir>/validation.csv.

    Returns:
        True when every check passed
    """
    results = run_suites(config, suites or list(SUITES))
    write_csv(
        Path(config.output_dir) / "validation.csv",
        ("test", "value", "tolerance", "pass"),
        [result.row() for result in results],
    )
    failed = [result.test for result in results if not result.passed]
    if failed:
        logger.warning("%d of %d checks failed: %s", len(failed), len(results), ", ".join(failed))
    else:
        logger.info("All %d checks passed", len(results))
    return not failed
