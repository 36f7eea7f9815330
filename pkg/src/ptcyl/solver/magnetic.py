"""
Magnetic - Induction tableau with insulating exterior

The magnetic potentials of a block are advanced through

    f   : (mu - Delta) f = mu (f^n + dt S_psiB)      wall sigma_f, f = 0 on the disk
    psi : Delta_h psi = f
    g   : (mu - Delta) g = mu (g^n + dt S_phiB)      wall sigma_g, disk sigma_disk
    phi : Delta_h phi = g                            phi = sigma_phi at the wall

with mu = Rm/dt. The field continues outside as the gradient of a harmonic
potential whose boundary values are d_z phi; the DtN map supplies its
normal derivatives and the influence matrix enforces continuity of B and
the wall compatibility of the induction equation.

matching_residual measures the jump of every component of B on the
synthesized traces. Its B_z part keeps the tau term of Delta_h phi = g,
the top radial coefficient of g.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Optional, Tuple

import numpy as np

from .dtn import DtnMap
from .elliptic import HelmholtzOperator, HorizontalPoisson
from .errors import DimensionError
from .hydro import (
    BlockKey,
    MagneticState,
    PotentialState,
    SourceTerms,
    VelocityState,
    check_residual,
    chebyshev_block,
    cross,
    physical_vector,
    project_vector,
    rms_amplitude,
    smooth_coefficients,
)
from .influence import BlockLayout, InfluenceMatrix
from .spectral import (
    PARITIES,
    PhysicalGrid,
    SpectralBasis,
    SpectralField,
    curl_z,
    neg_curl_curl_z,
    other_parity,
)

logger = logging.getLogger(__name__)


def magnetic_compatibility_residual(
    basis: SpectralBasis,
    new: PotentialState,
    old: Optional[PotentialState],
    dt: float,
    rm: float,
) -> np.ndarray:
    """
    e_r . (d_t - Rm^-1 Delta) B at r = 1 in potential form.

    Each potential X enters through (X - X^n)/dt - Rm^-1 Delta X; a missing
    old state counts as zero.
    """

    def implicit(x_new: SpectralField, x_old: Optional[SpectralField]) -> SpectralField:
        out = x_new / dt - basis.apply_operator(x_new, "lap") / rm
        if x_old is not None:
            out = out - x_old / dt
        return out

    d_psi = implicit(new.psi, old.psi if old is not None else None)
    d_phi = implicit(new.phi, old.phi if old is not None else None)
    return 1j * new.m * basis.wall_trace(d_psi) + basis.wall_trace(
        basis.apply_operator(d_phi, "dz"), slope=True
    )


class MagneticTableau:
    """
    Elliptic chain and matching residuals of one magnetic block.

    Boundary data slots are ordered (sigma_g, sigma_f, sigma_disk, sigma_phi) and
    residuals (c_g, c_f, c_disk, c_phi); sigma_f and c_f are absent for m=0.
    """

    def __init__(
        self, basis: SpectralBasis, m: int, parity: str, rm: float, dt: float, dtn: DtnMap
    ):
        if dtn.m != m or dtn.parity != parity:
            raise DimensionError(
                f"DtN map (m={dtn.m}, p={dtn.parity}) does not match block ({m}, {parity})"
            )
        self.basis = basis
        self.m = m
        self.parity = parity
        self.p_phi = other_parity(parity)
        self.rm = float(rm)
        self.dt = float(dt)
        self.mu = self.rm / self.dt
        self.dtn = dtn
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
        self.poisson_phi = HorizontalPoisson(basis, m, "dirichlet")

        cols = [chebyshev_block(basis, "sigma_g", self.p_phi)]
        rows = [chebyshev_block(basis, "c_g", self.p_phi)]
        if m != 0:
            cols.append(chebyshev_block(basis, "sigma_f", parity))
            rows.append(chebyshev_block(basis, "c_f", parity))
        cols.append(("sigma_disk", n, "Q", 0, 1))
        rows.append(("c_disk", n, "Q", 0, 1))
        cols.append(chebyshev_block(basis, "sigma_phi", self.p_phi))
        rows.append(chebyshev_block(basis, "c_phi", parity))
        self.cols = BlockLayout.from_blocks(cols)
        self.rows = BlockLayout.from_blocks(rows)

    def solve(
        self,
        sigma: np.ndarray,
        old: Optional[PotentialState] = None,
        sources: Optional[SourceTerms] = None,
    ) -> PotentialState:
        basis, m = self.basis, self.m
        parts = self.cols.split(np.asarray(sigma, complex))
        rhs_f = basis.zeros(m, self.parity)
        rhs_g = basis.zeros(m, self.p_phi)
        if old is not None:
            rhs_f = rhs_f + self.mu * old.f_psi
            rhs_g = rhs_g + self.mu * old.g_phi
        if sources is not None:
            rhs_f = rhs_f + self.rm * sources.s_psi
            rhs_g = rhs_g + self.rm * sources.s_phi
        f = self.helm_f.solve(rhs_f, wall=parts.get("sigma_f"))
        psi = self.poisson_psi.solve(f)
        g = self.helm_g.solve(rhs_g, wall=parts["sigma_g"], disk=parts["sigma_disk"])
        phi = self.poisson_phi.solve(g, parts["sigma_phi"])
        return PotentialState(psi=psi, phi=phi, f_psi=f, g_phi=g)

    def exterior(self, fields: PotentialState) -> Tuple[np.ndarray, np.ndarray]:
        """Vacuum F_r at the wall and F_z at the top disk."""
        dz_phi = self.basis.apply_operator(fields.phi, "dz")
        return self.dtn.apply(self.basis.wall_trace(dz_phi), self.basis.disk_trace(dz_phi))

    def residuals(self, fields: PotentialState, old: Optional[PotentialState] = None) -> np.ndarray:
        basis, im = self.basis, 1j * self.m
        dz_phi = basis.apply_operator(fields.phi, "dz")
        dzz_phi = basis.apply_operator(dz_phi, "dz")
        f_r, f_z = self.exterior(fields)
        parts = {
            "c_g": basis.wall_trace(fields.g_phi) + basis.wall_trace(dzz_phi),
            "c_disk": -basis.disk_trace(fields.g_phi) - f_z,
            "c_phi": im * basis.wall_trace(fields.psi) + basis.wall_trace(dz_phi, slope=True) - f_r,
        }
        if self.m != 0:
            parts["c_f"] = magnetic_compatibility_residual(basis, fields, old, self.dt, self.rm)
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
        tolerance: float = 1e-9,
    ) -> Tuple[PotentialState, float]:
        sigma0 = np.zeros(self.cols.total, complex)
        trial = self.solve(sigma0, old, sources)
        c0 = self.residuals(trial, old)
        sigma = sigma0 - influence.apply_correction(c0)
        new = self.solve(sigma, old, sources)
        c = self.residuals(new, old)
        return new, check_residual(c, c0, new, tolerance, self.m, self.parity)


def matching_traces(
    basis: SpectralBasis, block: PotentialState, dtn: DtnMap
) -> Dict[str, np.ndarray]:
    """
    Jumps B^int - B^vac of each component on the wall and the top disk.

    The vacuum potential takes the value d_z phi on the boundary, so its
    tangential derivatives follow from interior traces; its normal
    derivatives come from the DtN map. The bottom disk follows by parity.
    Wall entries are Chebyshev coefficients, disk entries radial ones.
    """
    psi, phi = block.psi, block.phi
    dz_phi = basis.apply_operator(phi, "dz")
    dzz_phi = basis.apply_operator(dz_phi, "dz")
    lap_phi = basis.apply_operator(phi, "lap_h")
    f_r, f_z = dtn.apply(basis.wall_trace(dz_phi), basis.disk_trace(dz_phi))
    return {
        "wall_r": 1j * block.m * basis.wall_trace(psi)
        + basis.wall_trace(dz_phi, slope=True)
        - f_r,
        "wall_theta": -basis.wall_trace(psi, slope=True),
        "wall_z": -basis.wall_trace(lap_phi) - basis.wall_trace(dzz_phi),
        "disk_r": basis.disk_trace(basis.apply_operator(psi, "dtheta_over_r")),
        "disk_theta": -basis.disk_trace(basis.apply_operator(psi, "dr")),
        "disk_z": -basis.disk_trace(lap_phi) - f_z,
    }


def matching_residual(
    basis: SpectralBasis, state: MagneticState, dtn: Dict[BlockKey, DtnMap]
) -> float:
    """Largest matching jump over all blocks, relative to the rms field."""
    worst = 0.0
    for key, block in state.blocks.items():
        for jump in matching_traces(basis, block, dtn[key]).values():
            worst = max(worst, float(np.abs(jump).max(initial=0.0)))
    scale = rms_amplitude(basis, state)
    return worst / scale if scale > 0 else worst


def induction_sources(
    basis: SpectralBasis,
    grid: PhysicalGrid,
    velocity: VelocityState,
    magnetic: MagneticState,
) -> Dict[BlockKey, SourceTerms]:
    """S_psiB = -e_z . curl curl (u x B) and S_phiB = -e_z . curl (u x B) per block."""
    u = physical_vector(grid, velocity.vectors(basis))
    b = physical_vector(grid, magnetic.vectors(basis))
    emf = project_vector(grid, cross(u, b))
    out = {}
    for (m, parity) in magnetic.blocks:
        # the emf of a block has horizontal components of the other parity
        vector = emf[(m, other_parity(parity))]
        out[(m, parity)] = SourceTerms(neg_curl_curl_z(basis, vector), -curl_z(basis, vector))
    return out


class MagneticStepper:
    """Magnetic time stepping for every retained block."""

    def __init__(
        self,
        basis: SpectralBasis,
        rm: float,
        dt: float,
        dtn: Dict[BlockKey, DtnMap],
        residual_tolerance: float = 1e-9,
        threads: int = 1,
        thresholds: Optional[dict] = None,
        influences: Optional[Dict[BlockKey, InfluenceMatrix]] = None,
    ):
        self.basis = basis
        self.rm = float(rm)
        self.dt = float(dt)
        self.residual_tolerance = residual_tolerance
        self.threads = max(1, int(threads))
        self.thresholds = dict(thresholds or {})
        self.tableaux = {
            (m, p): MagneticTableau(basis, m, p, rm, dt, dtn[(m, p)])
            for m in basis.spec.modes
            for p in PARITIES
        }
        self.influences = influences if influences is not None else self.build_influences()

    def build_influences(self) -> Dict[BlockKey, InfluenceMatrix]:
        keys = list(self.tableaux)
        logger.info(
            "Building %d magnetic influence matrices on %d thread(s)", len(keys), self.threads
        )
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            built = pool.map(
                lambda key: self.tableaux[key].build_influence(**self.thresholds), keys
            )
            return dict(zip(keys, built))

    def timestep(
        self, state: MagneticState, sources: Optional[Dict[BlockKey, SourceTerms]] = None
    ) -> MagneticState:
        blocks: Dict[BlockKey, PotentialState] = {}
        residuals: Dict[BlockKey, float] = {}
        for key, tableau in self.tableaux.items():
            new, residual = tableau.advance(
                state.blocks[key],
                self.influences[key],
                sources.get(key) if sources else None,
                self.residual_tolerance,
            )
            blocks[key] = new
            residuals[key] = residual
        return MagneticState(
            blocks=blocks, t=state.t + self.dt, step=state.step + 1, residuals=residuals
        )


def seed_magnetic(stepper: MagneticStepper, amplitude: float, seed: int = 0) -> MagneticState:
    """Smooth random magnetic potentials; matching is restored by the first step."""
    rng = np.random.default_rng(seed)
    blocks = {}
    for (m, parity), tableau in stepper.tableaux.items():
        f = smooth_coefficients(stepper.basis, m, parity, amplitude, rng)
        g = smooth_coefficients(stepper.basis, m, tableau.p_phi, amplitude, rng)
        # the Poisson solves drop the top radial function of their right-hand side
        f.coeffs[:, -1] = 0.0
        g.coeffs[:, -1] = 0.0
        blocks[(m, parity)] = PotentialState(
            psi=tableau.poisson_psi.solve(f), phi=tableau.poisson_phi.solve(g), f_psi=f, g_phi=g
        )
    return MagneticState(blocks=blocks)
