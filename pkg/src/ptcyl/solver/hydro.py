"""
Hydro - Velocity tableau and time step

For every (m, parity) block the velocity potentials are advanced through
the chain

    f_psi  : (mu - Delta) f_psi = mu (f_psi^n + dt S_psi)     wall sigma_f, disk data
    psi    : Delta_h psi = f_psi
    g_phi  : (mu - Delta) g_phi = mu (g_phi^n + dt S_phi)     wall sigma_g, disk sigma_disk
    f_phi  : Delta f_phi = g_phi                               homogeneous Dirichlet, N - 1 radial
    phi    : Delta_h phi = f_phi                               phi = 0 at the wall

with mu = Re/dt. The boundary data sigma is fixed by an influence matrix so
that no-slip and the compatibility conditions hold after the step.

Usage:
    stepper = HydroStepper(basis, re=100.0, dt=1e-2, omega_top=1.0)
    state = stepper.timestep(zero_state(basis), sources)
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Type, TypeVar

import numpy as np
from numpy.polynomial import Polynomial, legendre

from .elliptic import HelmholtzOperator, HorizontalPoisson
from .errors import DimensionError, StepError
from .influence import BlockLayout, InfluenceMatrix
from .spectral import (
    PARITIES,
    PhysicalGrid,
    SpectralBasis,
    SpectralField,
    VectorFieldSlices,
    curl_z,
    divergence,
    neg_curl_curl_z,
    other_parity,
    vector_energy,
    vector_from_potentials,
)

logger = logging.getLogger(__name__)

BlockKey = Tuple[int, str]
COMPONENTS = ("r", "theta", "z")
SIDES = ("wall", "top", "bottom")


# =============================================================================
# STATE
# =============================================================================


@dataclass(frozen=True)
class PotentialState:
    """
    Potentials of one (m, parity) block and their intermediates.

    The parity of the block is the parity of psi; phi carries the other one.
    For the magnetic field f_psi holds f = Delta_h psi, g_phi holds
    g = Delta_h phi and f_phi is unused.
    """

    psi: SpectralField
    phi: SpectralField
    f_psi: SpectralField
    g_phi: SpectralField
    f_phi: Optional[SpectralField] = None

    @property
    def m(self) -> int:
        return self.psi.m

    def norm(self) -> float:
        return float(np.sqrt(self.psi.norm() ** 2 + self.phi.norm() ** 2))

    def vector(self, basis: SpectralBasis) -> VectorFieldSlices:
        return vector_from_potentials(basis, self.psi, self.phi)


@dataclass(frozen=True)
class FieldState:
    """Potentials of every retained block at time t."""

    blocks: Dict[BlockKey, PotentialState]
    t: float = 0.0
    step: int = 0
    residuals: Dict[BlockKey, float] = field(default_factory=dict)

    def vectors(self, basis: SpectralBasis) -> Dict[BlockKey, VectorFieldSlices]:
        return {key: block.vector(basis) for key, block in self.blocks.items()}

    def energy(self, basis: SpectralBasis) -> float:
        return vector_energy(basis, self.vectors(basis).values())


class VelocityState(FieldState):
    pass


class MagneticState(FieldState):
    pass


StateT = TypeVar("StateT", bound=FieldState)


def zero_block(
    basis: SpectralBasis, m: int, parity: str, with_f_phi: bool = True
) -> PotentialState:
    p_phi = other_parity(parity)
    return PotentialState(
        psi=basis.zeros(m, parity),
        phi=basis.zeros(m, p_phi),
        f_psi=basis.zeros(m, parity),
        g_phi=basis.zeros(m, p_phi),
        f_phi=basis.zeros(m, p_phi) if with_f_phi else None,
    )


def zero_state(basis: SpectralBasis, cls: Type[StateT] = VelocityState) -> StateT:
    with_f_phi = not issubclass(cls, MagneticState)
    blocks = {
        (m, p): zero_block(basis, m, p, with_f_phi) for m in basis.spec.modes for p in PARITIES
    }
    return cls(blocks=blocks)


# =============================================================================
# NONLINEAR TERMS
# =============================================================================


@dataclass
class PhysicalVector:
    """Cylindrical components of a vector and their derivatives on a PhysicalGrid."""

    value: Dict[str, np.ndarray]
    d_r: Dict[str, np.ndarray]
    d_theta: Dict[str, np.ndarray]
    d_z: Dict[str, np.ndarray]


def physical_vector(
    grid: PhysicalGrid, vectors: Dict[BlockKey, VectorFieldSlices]
) -> PhysicalVector:
    """Evaluate spin-component blocks on the padded grid."""
    modes: Dict[str, Dict[str, Dict[int, np.ndarray]]] = {
        kind: {c: {} for c in COMPONENTS} for kind in ("value", "d_r", "d_z")
    }
    for (m, _parity), vector in vectors.items():
        for kind, (dr, dz) in (("value", (0, 0)), ("d_r", (1, 0)), ("d_z", (0, 1))):
            plus = grid.evaluate(vector.plus, dr, dz)
            minus = grid.evaluate(vector.minus, dr, dz)
            parts = {
                "r": 0.5 * (plus + minus),
                "theta": (plus - minus) / 2j,
                "z": grid.evaluate(vector.axial, dr, dz),
            }
            for c, values in parts.items():
                store = modes[kind][c]
                store[m] = store.get(m, 0) + values

    def physical(kind: str, azimuthal: bool = False) -> Dict[str, np.ndarray]:
        out = {}
        for c in COMPONENTS:
            source = modes[kind][c]
            if azimuthal:
                source = {m: 1j * m * v for m, v in source.items()}
            out[c] = grid.to_physical(source)
        return out

    return PhysicalVector(
        value=physical("value"),
        d_r=physical("d_r"),
        d_theta=physical("value", azimuthal=True),
        d_z=physical("d_z"),
    )


def advective(grid: PhysicalGrid, a: PhysicalVector, b: PhysicalVector) -> Dict[str, np.ndarray]:
    """(a . grad) b in cylindrical components."""
    r = grid.r[None, None, :]
    ar, at, az = a.value["r"], a.value["theta"], a.value["z"]

    def directional(c: str) -> np.ndarray:
        return ar * b.d_r[c] + at * b.d_theta[c] / r + az * b.d_z[c]

    return {
        "r": directional("r") - at * b.value["theta"] / r,
        "theta": directional("theta") + at * b.value["r"] / r,
        "z": directional("z"),
    }


def cross(a: PhysicalVector, b: PhysicalVector) -> Dict[str, np.ndarray]:
    ar, at, az = (a.value[c] for c in COMPONENTS)
    br, bt, bz = (b.value[c] for c in COMPONENTS)
    return {"r": at * bz - az * bt, "theta": az * br - ar * bz, "z": ar * bt - at * br}


def project_vector(
    grid: PhysicalGrid, components: Dict[str, np.ndarray]
) -> Dict[BlockKey, VectorFieldSlices]:
    """
    Project physical components back onto spin blocks.

    The key parity is the parity of the horizontal components.
    """
    modes = {c: grid.to_modes(values) for c, values in components.items()}
    out: Dict[BlockKey, VectorFieldSlices] = {}
    for m in range(grid.mmax + 1):
        radial, azimuthal = modes["r"][m], modes["theta"][m]
        ell_minus = abs(m - 1)
        plus = grid.split(grid.project(radial + 1j * azimuthal, m + 1), m, m + 1)
        minus = grid.split(grid.project(radial - 1j * azimuthal, ell_minus), m, ell_minus)
        axial = grid.split(grid.project(modes["z"][m], m), m, m)
        for p in PARITIES:
            out[(m, p)] = VectorFieldSlices(plus[p], minus[p], axial[other_parity(p)])
    return out


def advection_physical(
    grid: PhysicalGrid,
    u_vectors: Dict[BlockKey, VectorFieldSlices],
    b_vectors: Optional[Dict[BlockKey, VectorFieldSlices]] = None,
) -> Dict[str, np.ndarray]:
    """S_u = (u . grad) u - (B . grad) B on the padded grid."""
    u = physical_vector(grid, u_vectors)
    s = advective(grid, u, u)
    if b_vectors:
        b = physical_vector(grid, b_vectors)
        lorentz = advective(grid, b, b)
        s = {c: s[c] - lorentz[c] for c in COMPONENTS}
    return s


def compute_advection(
    basis: SpectralBasis,
    grid: PhysicalGrid,
    u_vectors: Dict[BlockKey, VectorFieldSlices],
    b_vectors: Optional[Dict[BlockKey, VectorFieldSlices]] = None,
) -> Dict[BlockKey, VectorFieldSlices]:
    """Dealiased S_u in spin blocks keyed by horizontal parity."""
    return project_vector(grid, advection_physical(grid, u_vectors, b_vectors))


@dataclass(frozen=True)
class SourceTerms:
    """
    Right-hand sides of one block.

    Attributes:
        s_psi: Source of the psi chain (parity of the block)
        s_phi: Source of the phi chain (other parity)
        wall: Extra wall compatibility term, if any
    """

    s_psi: SpectralField
    s_phi: SpectralField
    wall: Optional[np.ndarray] = None


def wall_curl_radial(basis: SpectralBasis, vector: VectorFieldSlices) -> np.ndarray:
    """e_r . curl of a vector at r = 1: i m F_z - d_z F_theta."""
    dz_plus = basis.wall_trace(basis.apply_operator(vector.plus, "dz"))
    dz_minus = basis.wall_trace(basis.apply_operator(vector.minus, "dz"))
    return 1j * vector.m * basis.wall_trace(vector.axial) - (dz_plus - dz_minus) / 2j


def hydro_sources(
    basis: SpectralBasis,
    s_u: Dict[BlockKey, VectorFieldSlices],
    re: float,
    wall_term: bool = False,
) -> Dict[BlockKey, SourceTerms]:
    """S_psi = e_z . curl S_u and S_phi = -e_z . curl curl S_u per block."""
    out = {}
    for key, vector in s_u.items():
        wall = re * wall_curl_radial(basis, vector) if wall_term else None
        out[key] = SourceTerms(curl_z(basis, vector), neg_curl_curl_z(basis, vector), wall)
    return out


# =============================================================================
# TABLEAU
# =============================================================================


def chebyshev_block(basis: SpectralBasis, name: str, parity: str) -> Tuple[str, int, str, int, int]:
    indices = basis.indices(parity)
    return (name, indices.size, "T", int(indices[0]), 2)


class HydroTableau:
    """
    Elliptic chain and boundary residuals of one velocity block.

    Boundary data slots are ordered (sigma_g, sigma_f, sigma_disk) and residuals
    (c_g, c_f, c_disk); for m = 0 sigma_f and c_f are absent and the wall
    condition on f_psi is the integral constraint.
    """

    def __init__(self, basis: SpectralBasis, m: int, parity: str, re: float, dt: float):
        self.basis = basis
        self.m = m
        self.parity = parity
        self.p_phi = other_parity(parity)
        self.re = float(re)
        self.dt = float(dt)
        self.mu = self.re / self.dt
        n = basis.spec.N
        if m == 0:
            self.helm_f = HelmholtzOperator(
                basis, 0, parity, self.mu, wall_kind="integral", corner="disk"
            )
            self.poisson_psi = HorizontalPoisson(basis, 0, "axis")
        else:
            self.helm_f = HelmholtzOperator(basis, m, parity, self.mu, corner="wall")
            self.poisson_psi = HorizontalPoisson(basis, m, "neumann")
        self.helm_g = HelmholtzOperator(basis, m, self.p_phi, self.mu, corner="wall")
        # f_phi stops one radial degree short so that Delta_h phi = f_phi holds exactly
        self.helm_f_phi = HelmholtzOperator(
            basis, m, self.p_phi, 0.0, corner="wall", radial_size=n - 1
        )
        self.poisson_phi = HorizontalPoisson(basis, m, "dirichlet")

        cols = [chebyshev_block(basis, "sigma_g", self.p_phi)]
        rows = [chebyshev_block(basis, "c_g", parity)]
        if m != 0:
            cols.append(chebyshev_block(basis, "sigma_f", parity))
            rows.append(chebyshev_block(basis, "c_f", self.p_phi))
        cols.append(("sigma_disk", n, "Q", 0, 1))
        rows.append(("c_disk", n, "Q", 0, 1))
        self.cols = BlockLayout.from_blocks(cols)
        self.rows = BlockLayout.from_blocks(rows)

    def solve(
        self,
        sigma: np.ndarray,
        old: Optional[PotentialState] = None,
        sources: Optional[SourceTerms] = None,
        disk_f: Optional[np.ndarray] = None,
    ) -> PotentialState:
        """Run the elliptic chain for boundary data sigma."""
        basis, m = self.basis, self.m
        parts = self.cols.split(np.asarray(sigma, complex))
        rhs_f = basis.zeros(m, self.parity)
        rhs_g = basis.zeros(m, self.p_phi)
        if old is not None:
            rhs_f = rhs_f + self.mu * old.f_psi
            rhs_g = rhs_g + self.mu * old.g_phi
        if sources is not None:
            rhs_f = rhs_f + self.re * sources.s_psi
            rhs_g = rhs_g + self.re * sources.s_phi
        f_psi = self.helm_f.solve(rhs_f, wall=parts.get("sigma_f"), disk=disk_f)
        psi = self.poisson_psi.solve(f_psi)
        g_phi = self.helm_g.solve(rhs_g, wall=parts["sigma_g"], disk=parts["sigma_disk"])
        f_phi = self.helm_f_phi.solve(-g_phi)
        phi = self.poisson_phi.solve(f_phi)
        return PotentialState(psi=psi, phi=phi, f_psi=f_psi, g_phi=g_phi, f_phi=f_phi)

    def residuals(self, fields: PotentialState, wall: Optional[np.ndarray] = None) -> np.ndarray:
        """Wall radial velocity, wall compatibility and disk continuity residuals."""
        basis, im = self.basis, 1j * self.m
        parts = {
            "c_g": im * basis.wall_trace(fields.psi)
            + basis.wall_trace(basis.apply_operator(fields.phi, "dz"), slope=True),
            "c_disk": basis.disk_trace(basis.apply_operator(fields.f_phi, "dz")),
        }
        if self.m != 0:
            c_f = basis.wall_trace(basis.apply_operator(fields.f_psi, "dz"), slope=True)
            c_f = c_f - im * basis.wall_trace(fields.g_phi)
            if wall is not None:
                c_f = c_f + wall
            parts["c_f"] = c_f
        return self.rows.join(parts)

    def homogeneous(self, sigma: np.ndarray) -> np.ndarray:
        return self.residuals(self.solve(sigma))

    def build_influence(self, **thresholds) -> InfluenceMatrix:
        return InfluenceMatrix.build(
            self.m, self.parity, self.homogeneous, self.rows, self.cols, **thresholds
        )

    def advance(
        self,
        old: PotentialState,
        influence: InfluenceMatrix,
        sources: Optional[SourceTerms] = None,
        disk_f: Optional[np.ndarray] = None,
        placeholder: Optional[np.ndarray] = None,
        tolerance: float = 1e-9,
    ) -> Tuple[PotentialState, float]:
        """
        Particular pass, influence correction and corrected pass.

        Returns:
            Tuple (new potentials, relative residual after correction)

        Raises:
            StepError: if the corrected residual is above tolerance
        """
        wall = sources.wall if sources is not None else None
        sigma0 = np.zeros(self.cols.total, complex) if placeholder is None else placeholder
        trial = self.solve(sigma0, old, sources, disk_f)
        c0 = self.residuals(trial, wall)
        sigma = sigma0 - influence.apply_correction(c0)
        new = self.solve(sigma, old, sources, disk_f)
        c = self.residuals(new, wall)
        return new, check_residual(c, c0, new, tolerance, self.m, self.parity)


def check_residual(
    c: np.ndarray, c0: np.ndarray, new: PotentialState, tolerance: float, m: int, parity: str
) -> float:
    scale = max(float(np.linalg.norm(c0)), new.norm())
    if scale == 0.0:
        return 0.0
    relative = float(np.linalg.norm(c)) / scale
    if relative > tolerance:
        raise StepError(
            f"Boundary residual {relative:.3e} above tolerance {tolerance:.1e} "
            f"after correction (m={m}, p={parity})"
        )
    return relative


# =============================================================================
# STEPPER
# =============================================================================


def spinup_ramp(step: int, spinup_steps: int) -> float:
    if spinup_steps <= 0:
        return 1.0
    return min(1.0, (step + 1) / spinup_steps)


def lid_speeds(
    omega_top: float, omega_bottom: float, spinup_steps: int, step: int
) -> Tuple[float, float]:
    """Disk angular velocities imposed on the state reached after `step` steps."""
    ramp = spinup_ramp(max(step - 1, 0), spinup_steps)
    return omega_top * ramp, omega_bottom * ramp


def lid_velocity(r: np.ndarray, omega: float, smoothing: int = 0) -> np.ndarray:
    """u_theta on a disk: omega r, or omega r (1 - r^2q) for smoothing q > 0."""
    r = np.asarray(r, dtype=float)
    if smoothing == 0:
        return omega * r
    return omega * r * (1.0 - r ** (2 * smoothing))


def disk_forcing(
    basis: SpectralBasis,
    parity: str,
    omega_top: float,
    omega_bottom: float,
    ramp: float = 1.0,
    smoothing: int = 0,
) -> np.ndarray:
    """
    Disk data of f_psi = Delta_h psi = -(1/r) d_r (r u_theta) for m = 0.

    Rigid disks give the constant -2 omega. The smoothed profile of order q
    gives -2 omega + (2q + 2) omega s^q with s = r^2, expanded in the
    shifted Legendre functions Q_j^0.
    """
    if parity == "s":
        omega = 0.5 * (omega_top + omega_bottom)
    else:
        omega = 0.5 * (omega_top - omega_bottom)
    n = basis.spec.N
    if smoothing > n - 2:
        raise DimensionError(f"Disk smoothing {smoothing} needs N >= {smoothing + 2}, got N={n}")
    data = np.zeros(n, complex)
    data[0] = -2.0
    if smoothing > 0:
        # s = (1 + x) / 2 with x = 2 r^2 - 1
        power = legendre.poly2leg((Polynomial([0.5, 0.5]) ** smoothing).coef)
        data[: power.size] += (2 * smoothing + 2) * power
    return data * omega * ramp


class HydroStepper:
    """
    Velocity time stepping for every retained block.

    Influence matrices are built once per (m, parity) at construction unless
    they are passed in (e.g. loaded from the cache).
    """

    def __init__(
        self,
        basis: SpectralBasis,
        re: float,
        dt: float,
        omega_top: float = 0.0,
        omega_bottom: float = 0.0,
        spinup_steps: int = 0,
        residual_tolerance: float = 1e-9,
        threads: int = 1,
        thresholds: Optional[dict] = None,
        influences: Optional[Dict[BlockKey, InfluenceMatrix]] = None,
        disk_smoothing: int = 0,
    ):
        self.basis = basis
        self.re = float(re)
        self.dt = float(dt)
        self.omega_top = float(omega_top)
        self.omega_bottom = float(omega_bottom)
        self.spinup_steps = int(spinup_steps)
        self.disk_smoothing = int(disk_smoothing)
        self.residual_tolerance = residual_tolerance
        self.threads = max(1, int(threads))
        self.thresholds = dict(thresholds or {})
        self.tableaux = {
            (m, p): HydroTableau(basis, m, p, re, dt) for m in basis.spec.modes for p in PARITIES
        }
        self.influences = influences if influences is not None else self.build_influences()

    def build_influences(self) -> Dict[BlockKey, InfluenceMatrix]:
        keys = list(self.tableaux)
        logger.info(
            "Building %d velocity influence matrices on %d thread(s)", len(keys), self.threads
        )
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            built = pool.map(
                lambda key: self.tableaux[key].build_influence(**self.thresholds), keys
            )
            return dict(zip(keys, built))

    def ramp(self, step: int) -> float:
        return spinup_ramp(step, self.spinup_steps)

    def lid_speeds(self, step: int) -> Tuple[float, float]:
        return lid_speeds(self.omega_top, self.omega_bottom, self.spinup_steps, step)

    def disk_data(self, key: BlockKey, step: int) -> Optional[np.ndarray]:
        m, parity = key
        if m != 0 or (self.omega_top == 0.0 and self.omega_bottom == 0.0):
            return None
        return disk_forcing(
            self.basis,
            parity,
            self.omega_top,
            self.omega_bottom,
            self.ramp(step),
            self.disk_smoothing,
        )

    def timestep(
        self,
        state: VelocityState,
        sources: Optional[Dict[BlockKey, SourceTerms]] = None,
        placeholders: Optional[Dict[BlockKey, np.ndarray]] = None,
    ) -> VelocityState:
        """
        Advance every block by dt.

        The input state is not modified; a failing block leaves no partial
        update behind.
        """
        blocks: Dict[BlockKey, PotentialState] = {}
        residuals: Dict[BlockKey, float] = {}
        for key, tableau in self.tableaux.items():
            new, residual = tableau.advance(
                state.blocks[key],
                self.influences[key],
                sources.get(key) if sources else None,
                self.disk_data(key, state.step),
                placeholders.get(key) if placeholders else None,
                self.residual_tolerance,
            )
            blocks[key] = new
            residuals[key] = residual
        return VelocityState(
            blocks=blocks, t=state.t + self.dt, step=state.step + 1, residuals=residuals
        )


def timestep(
    state: VelocityState,
    sources: Optional[Dict[BlockKey, SourceTerms]],
    stepper: HydroStepper,
) -> VelocityState:
    return stepper.timestep(state, sources)


def smooth_coefficients(
    basis: SpectralBasis, m: int, parity: str, amplitude: float, rng: np.random.Generator
) -> SpectralField:
    """Random coefficients decaying geometrically with k and j (real for m = 0)."""
    kp, n = basis.size(parity), basis.spec.N
    decay = 0.5 ** (np.arange(kp)[:, None] + np.arange(n)[None, :])
    values = rng.standard_normal((kp, n))
    if m != 0:
        values = values + 1j * rng.standard_normal((kp, n))
    return SpectralField(m, parity, amplitude * decay * values)


def seed_velocity(stepper: HydroStepper, amplitude: float, seed: int = 0) -> VelocityState:
    """Smooth random velocity potentials; boundary conditions are restored by the first step."""
    rng = np.random.default_rng(seed)
    blocks = {}
    for (m, parity), tableau in stepper.tableaux.items():
        f_psi = smooth_coefficients(stepper.basis, m, parity, amplitude, rng)
        # Delta_h psi reproduces f_psi only without the top radial function
        f_psi.coeffs[:, -1] = 0.0
        g_phi = smooth_coefficients(stepper.basis, m, tableau.p_phi, amplitude, rng)
        f_phi = tableau.helm_f_phi.solve(-g_phi)
        blocks[(m, parity)] = PotentialState(
            psi=tableau.poisson_psi.solve(f_psi),
            phi=tableau.poisson_phi.solve(f_phi),
            f_psi=f_psi,
            g_phi=g_phi,
            f_phi=f_phi,
        )
    return VelocityState(blocks=blocks)


# =============================================================================
# DIAGNOSTICS
# =============================================================================


def divergence_norm(basis: SpectralBasis, state: FieldState) -> float:
    """Largest divergence coefficient relative to the field norm."""
    worst, scale = 0.0, 0.0
    for block in state.blocks.values():
        vector = block.vector(basis)
        worst = max(worst, float(np.abs(divergence(basis, vector).coeffs).max()))
        scale = max(scale, vector.norm())
    return worst / scale if scale > 0 else 0.0


def increment_norm(old: FieldState, new: FieldState) -> float:
    """Largest potential change between two states, relative to the new norm."""
    change, scale = 0.0, 0.0
    for key, block in new.blocks.items():
        previous = old.blocks[key]
        change = max(change, (block.psi - previous.psi).norm(), (block.phi - previous.phi).norm())
        scale = max(scale, block.norm())
    return change / scale if scale > 0 else change


def disk_torque(basis: SpectralBasis, state: VelocityState, re: float) -> Tuple[float, float]:
    """
    Viscous torque (2 pi / Re) * integral of r^2 d_z u_theta dr on the top and bottom disks.
    """
    x, w = legendre.leggauss(basis.spec.N + 4)
    r = 0.5 * (1.0 + x)
    w = 0.5 * w
    z = np.array([0.5 * basis.spec.h, -0.5 * basis.spec.h])
    slope = np.zeros((2, r.size), complex)
    for (m, _parity), block in state.blocks.items():
        if m != 0:
            continue
        vector = block.vector(basis)
        plus = basis.evaluate(vector.plus, r, z, dz=1)
        minus = basis.evaluate(vector.minus, r, z, dz=1)
        slope += (plus - minus) / 2j
    torque = (2.0 * np.pi / re) * (slope.real * r**2) @ w
    return float(torque[0]), float(torque[1])


def rms_amplitude(basis: SpectralBasis, state: FieldState) -> float:
    """Root mean square of the field over the cylinder, sqrt(2 E / V)."""
    return float(np.sqrt(2.0 * state.energy(basis) / (np.pi * basis.spec.h)))


def boundary_points(basis: SpectralBasis) -> Tuple[np.ndarray, np.ndarray]:
    """Radii sampled on the disks and heights sampled on the wall, corners included."""
    spec = basis.spec
    r = np.linspace(0.0, 1.0, 2 * spec.N + 1)
    z = 0.5 * spec.h * np.cos(np.pi * np.arange(2 * spec.K) / (2 * spec.K - 1))
    return r, z


def _sample(basis: SpectralBasis, field: SpectralField, side: str) -> np.ndarray:
    r, z = boundary_points(basis)
    if side == "wall":
        return basis.evaluate(field, np.ones(1), z)[:, 0]
    height = 0.5 * basis.spec.h if side == "top" else -0.5 * basis.spec.h
    return basis.evaluate(field, r, np.array([height]))[0]


def boundary_velocity(
    basis: SpectralBasis, state: FieldState
) -> Dict[str, Dict[int, Dict[str, np.ndarray]]]:
    """
    Azimuthal modes of (u_r, u_theta, u_z) synthesized on the boundary.

    Returns:
        {side: {m: {component: values}}} for the sides "wall" (at the
        heights of boundary_points), "top" and "bottom" (at its radii)
    """
    out: Dict[str, Dict[int, Dict[str, np.ndarray]]] = {side: {} for side in SIDES}
    for (m, _parity), block in state.blocks.items():
        vector = block.vector(basis)
        for side in SIDES:
            plus = _sample(basis, vector.plus, side)
            minus = _sample(basis, vector.minus, side)
            parts = {
                "r": 0.5 * (plus + minus),
                "theta": (plus - minus) / 2j,
                "z": _sample(basis, vector.axial, side),
            }
            store = out[side].setdefault(m, {c: np.zeros_like(plus) for c in COMPONENTS})
            for c, values in parts.items():
                store[c] = store[c] + values
    return out


def boundary_residual(
    basis: SpectralBasis,
    state: VelocityState,
    omega_top: float = 0.0,
    omega_bottom: float = 0.0,
    smoothing: int = 0,
) -> float:
    """
    Largest no-slip violation of the synthesized velocity.

    The wall is at rest and the disks turn with lid_velocity; every
    component of every azimuthal mode is compared. The result is relative to
    the larger of the disk speeds and the rms velocity.
    """
    r, _ = boundary_points(basis)
    lids = {
        "top": lid_velocity(r, omega_top, smoothing),
        "bottom": lid_velocity(r, omega_bottom, smoothing),
    }
    worst = 0.0
    for side, modes in boundary_velocity(basis, state).items():
        for m, components in modes.items():
            for c, values in components.items():
                expected = lids[side] if m == 0 and c == "theta" and side in lids else 0.0
                worst = max(worst, float(np.abs(values - expected).max()))
    scale = max(abs(omega_top), abs(omega_bottom), rms_amplitude(basis, state))
    return worst / scale if scale > 0 else worst


def diagnostics(
    basis: SpectralBasis,
    state: VelocityState,
    re: float,
    omega_top: float = 0.0,
    omega_bottom: float = 0.0,
    smoothing: int = 0,
) -> Dict[str, float]:
    """
    Kinetic energy, divergence, boundary residuals and disk torques.

    max_bc_residual comes from the synthesized velocity on the boundary;
    influence_residual is the largest corrected influence row of the last step.
    """
    top, bottom = disk_torque(basis, state, re)
    return {
        "energy": state.energy(basis),
        "divergence": divergence_norm(basis, state),
        "max_bc_residual": boundary_residual(basis, state, omega_top, omega_bottom, smoothing),
        "influence_residual": max(state.residuals.values(), default=0.0),
        "torque_top": top,
        "torque_bottom": bottom,
    }
