"""
Storage - Snapshots, CSV exports and the precompute cache

Snapshot layout (little endian):

    b"PTCYL1"
    int64 M, int64 K, int64 N, float64 h
    per m, per parity (s, a): psi_u, phi_u [, psi_B, phi_B] as complex128
    arrays of shape (Chebyshev functions of the field parity, N), k major

The magnetic potentials are present exactly when the run evolves B; readers
tell the two layouts apart by the file size.

Cache entries are `.npz` archives named by the SHA-256 of a canonical JSON
payload; the payload is stored inside and compared on load.
"""

import csv
import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CacheIntegrityError, DimensionError
from .hydro import FieldState, MagneticState, PotentialState, VelocityState
from .spectral import PARITIES, BasisSpec, SpectralBasis, SpectralField, other_parity

logger = logging.getLogger(__name__)

MAGIC = b"PTCYL1"
HEADER = struct.Struct("<qqqd")
VELOCITY_FIELDS = ("psi_u", "phi_u")
MAGNETIC_FIELDS = ("psi_B", "phi_B")


def format_float(value: float) -> str:
    return f"{value:.17g}"


# =============================================================================
# SNAPSHOTS
# =============================================================================


def _block_order(spec: BasisSpec) -> List[Tuple[int, str]]:
    return [(m, p) for m in spec.modes for p in PARITIES]


def _field_parity(name: str, parity: str) -> str:
    # psi carries the block parity, phi the other one
    return parity if name.startswith("psi") else other_parity(parity)


def snapshot_size(spec: BasisSpec, mhd: bool = False) -> int:
    """Bytes of a snapshot with or without the magnetic potentials."""
    names = VELOCITY_FIELDS + (MAGNETIC_FIELDS if mhd else ())
    values = sum(
        spec.parity_size(_field_parity(name, p)) * spec.N
        for _m, p in _block_order(spec)
        for name in names
    )
    return len(MAGIC) + HEADER.size + 16 * values


def write_snapshot(
    path: Path,
    spec: BasisSpec,
    velocity: VelocityState,
    magnetic: Optional[MagneticState] = None,
) -> None:
    """Write psi/phi of the velocity (and magnetic) state."""
    names = VELOCITY_FIELDS + (MAGNETIC_FIELDS if magnetic is not None else ())
    states: Dict[str, FieldState] = {name: velocity for name in VELOCITY_FIELDS}
    if magnetic is not None:
        states.update({name: magnetic for name in MAGNETIC_FIELDS})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(HEADER.pack(spec.M, spec.K, spec.N, spec.h))
        for key in _block_order(spec):
            for name in names:
                attr = "psi" if name.startswith("psi") else "phi"
                block = getattr(states[name].blocks[key], attr)
                handle.write(np.ascontiguousarray(block.coeffs, dtype="<c16").tobytes())
    logger.debug("Wrote snapshot %s (%s)", path, ", ".join(names))


def read_snapshot(path: Path) -> Tuple[BasisSpec, Dict[str, Dict[Tuple[int, str], SpectralField]]]:
    """
    Read a snapshot; the file size tells whether magnetic potentials follow.

    Returns:
        Tuple (resolution, {field name: {(m, parity): field}})
    """
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC) or len(data) < len(MAGIC) + HEADER.size:
        raise DimensionError(f"{path} is not a ptcyl snapshot")
    offset = len(MAGIC)
    M, K, N, h = HEADER.unpack_from(data, offset)
    offset += HEADER.size
    spec = BasisSpec(M=int(M), K=int(K), N=int(N), h=float(h))
    sizes = {snapshot_size(spec, mhd): mhd for mhd in (False, True)}
    if len(data) not in sizes:
        raise DimensionError(
            f"{path}: {len(data)} bytes match neither {sorted(sizes)} for resolution {spec}"
        )
    names = VELOCITY_FIELDS + (MAGNETIC_FIELDS if sizes[len(data)] else ())
    out: Dict[str, Dict[Tuple[int, str], SpectralField]] = {name: {} for name in names}
    for m, p in _block_order(spec):
        for name in names:
            parity = _field_parity(name, p)
            shape = (spec.parity_size(parity), spec.N)
            count = shape[0] * shape[1]
            values = np.frombuffer(data, dtype="<c16", count=count, offset=offset)
            out[name][(m, p)] = SpectralField(m, parity, values.reshape(shape).copy())
            offset += 16 * count
    return spec, out


# =============================================================================
# CSV
# =============================================================================


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])


def export_mode_csv(
    path: Path,
    basis: SpectralBasis,
    field: SpectralField,
    r: np.ndarray,
    z: np.ndarray,
    theta: float = 0.0,
) -> None:
    """
    Contribution of one block to the real field on an (r, z) grid.

    The value is Re(f e^(i m theta)) for m = 0 and twice that otherwise, the
    conjugate mode -m included.
    """
    weight = 1.0 if field.m == 0 else 2.0
    values = weight * (basis.evaluate(field, r, z) * np.exp(1j * field.m * theta)).real
    rows = [
        (float(rj), float(zi), float(values[i, j]))
        for i, zi in enumerate(z)
        for j, rj in enumerate(r)
    ]
    write_csv(path, ("r", "z", "value"), rows)


def states_from_snapshot(
    basis: SpectralBasis,
    fields: Dict[str, Dict[Tuple[int, str], SpectralField]],
    magnetic: bool = False,
) -> FieldState:
    """Rebuild a state from snapshot potentials, recomputing the intermediates."""
    psi_name, phi_name = MAGNETIC_FIELDS if magnetic else VELOCITY_FIELDS
    blocks = {}
    for key, psi in fields[psi_name].items():
        phi = fields[phi_name][key]
        f_psi = basis.apply_operator(psi, "lap_h")
        lap_h_phi = basis.apply_operator(phi, "lap_h")
        if magnetic:
            blocks[key] = PotentialState(psi=psi, phi=phi, f_psi=f_psi, g_phi=lap_h_phi)
        else:
            blocks[key] = PotentialState(
                psi=psi,
                phi=phi,
                f_psi=f_psi,
                g_phi=basis.apply_operator(lap_h_phi, "lap"),
                f_phi=lap_h_phi,
            )
    return MagneticState(blocks=blocks) if magnetic else VelocityState(blocks=blocks)


# =============================================================================
# CACHE
# =============================================================================


class ArtifactCache:
    """
    Content-addressed store of precomputed arrays.

    Example:
        cache = ArtifactCache(".ptcyl-cache")
        arrays, hit = cache.get_or_build({"kind": "influence", "m": 1}, build)
    """

    def __init__(self, directory: str):
        self.directory = Path(directory)

    @staticmethod
    def canonical(payload: Dict) -> str:
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def key(self, payload: Dict) -> str:
        return hashlib.sha256(self.canonical(payload).encode("utf-8")).hexdigest()

    def path(self, payload: Dict) -> Path:
        return self.directory / f"{self.key(payload)}.npz"

    def load(self, payload: Dict) -> Optional[Dict[str, np.ndarray]]:
        path = self.path(payload)
        if not path.is_file():
            return None
        with np.load(path, allow_pickle=False) as archive:
            stored = str(archive["__payload__"])
            if stored != self.canonical(payload):
                raise CacheIntegrityError(
                    f"Cache entry {path.name} was written for a different payload"
                )
            return {name: archive[name] for name in archive.files if name != "__payload__"}

    def store(self, payload: Dict, arrays: Dict[str, np.ndarray]) -> Path:
        path = self.path(payload)
        self.directory.mkdir(parents=True, exist_ok=True)
        np.savez(path, __payload__=np.array(self.canonical(payload)), **arrays)
        return path

    def get_or_build(
        self, payload: Dict, build: Callable[[], Dict[str, np.ndarray]]
    ) -> Tuple[Dict[str, np.ndarray], bool]:
        """
        Returns:
            Tuple (arrays, hit) where hit tells whether the entry was cached
        """
        arrays = self.load(payload)
        if arrays is not None:
            logger.debug("Cache hit %s", self.key(payload)[:12])
            return arrays, True
        arrays = build()
        self.store(payload, arrays)
        logger.debug("Cache store %s", self.key(payload)[:12])
        return arrays, False
