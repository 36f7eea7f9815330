"""
Elliptic - Tau solvers on the meridional half-slice

Solves (mu - Delta) f = rhs for one (m, parity) block with conditions at the
wall r = 1 and at the disk z = +h/2 (the disk at -h/2 follows from parity),
and Delta_h f = rhs slice by slice in z.

The tau method replaces the highest equation rows by boundary rows. At the
corner r = 1, z = h/2 one of the two conditions has to give way:

    corner="disk"   disk rows for every radial function, wall rows for k < last
    corner="wall"   wall rows for every Chebyshev function, disk rows for j < last

The fast path eliminates the fully imposed condition, diagonalises the
remaining one-dimensional operator and solves one small LU system per
eigenvalue. `dense_system` assembles exactly the same rows as a Kronecker
collocation matrix and is used as an oracle.

With radial_size < N the solution is sought in the first radial_size radial
functions only and the remaining coefficients are zero.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from .errors import DimensionError, SolvabilityError
from .spectral import SpectralBasis, SpectralField

logger = logging.getLogger(__name__)

LOCATIONS = ("wall", "disk", "axis")
KINDS = ("dirichlet", "neumann", "integral")
CORNERS = ("disk", "wall")

SINGULAR_CONDITION = 1e14


@dataclass(frozen=True)
class BoundaryCondition:
    """
    One boundary condition of an elliptic problem.

    Attributes:
        location: "wall" (r=1), "disk" (z=+h/2) or "axis" (r=0)
        kind: "dirichlet", "neumann" or "integral"
        data: Trace coefficients (T_k at the wall, Q_j at the disk); None for zero
    """

    location: str
    kind: str = "dirichlet"
    data: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.location not in LOCATIONS:
            raise DimensionError(f"Unknown boundary location {self.location!r}")
        if self.kind not in KINDS:
            raise DimensionError(f"Unknown boundary kind {self.kind!r}")
        if self.kind == "integral" and self.location != "wall":
            raise DimensionError("The integral constraint is only defined at r=1")
        if self.location == "axis" and self.kind != "dirichlet":
            raise DimensionError("Only a value can be prescribed on the axis")


def apply_integral_constraint(basis: SpectralBasis, m: int) -> np.ndarray:
    """
    Boundary row encoding the integral of r f(r) over [0, 1].

    Only the axisymmetric mode carries this constraint; it replaces the
    Neumann solvability condition at r=1.
    """
    if m != 0:
        raise DimensionError(f"The integral constraint applies to m=0 only, got m={m}")
    return basis.radial_rows(0)["moment"].copy()


def wall_row(basis: SpectralBasis, m: int, kind: str) -> np.ndarray:
    rows = basis.radial_rows(m)
    if kind == "dirichlet":
        return rows["value"]
    if kind == "neumann":
        return rows["slope"]
    if kind == "integral":
        return apply_integral_constraint(basis, m)
    raise DimensionError(f"Unknown wall condition {kind!r}")


def disk_row(basis: SpectralBasis, parity: str, kind: str) -> np.ndarray:
    rows = basis.chebyshev_rows(parity)
    if kind == "dirichlet":
        return rows["value"]
    if kind == "neumann":
        return rows["slope"]
    raise DimensionError(f"Unsupported disk condition {kind!r}")


def _factor(matrix: np.ndarray, what: str):
    cond = np.linalg.cond(matrix)
    if not np.isfinite(cond) or cond > SINGULAR_CONDITION:
        raise SolvabilityError(
            f"{what} is singular (condition {cond:.3e}); a pure Neumann problem needs "
            "a compatible right-hand side and a fixed constant"
        )
    return linalg.lu_factor(matrix)


class HelmholtzOperator:
    """
    Factorised (mu - Delta) with tau boundary rows for one (m, parity).

    Disk data beyond radial_size is ignored.

    Example:
        op = HelmholtzOperator(basis, m=1, parity="s", mu=100.0)
        f = op.solve(rhs, wall=np.zeros(basis.size("s")), disk=np.zeros(basis.spec.N))
    """

    def __init__(
        self,
        basis: SpectralBasis,
        m: int,
        parity: str,
        mu: float,
        wall_kind: str = "dirichlet",
        disk_kind: str = "dirichlet",
        corner: str = "disk",
        radial_size: Optional[int] = None,
    ):
        if corner not in CORNERS:
            raise DimensionError(f"Unknown corner convention {corner!r}")
        if corner == "wall" and wall_kind == "integral":
            raise DimensionError("The integral constraint cannot be imposed on every z mode")
        if basis.size(parity) < 2:
            raise DimensionError(f"Parity {parity} needs at least two Chebyshev modes")
        n_active = basis.spec.N if radial_size is None else int(radial_size)
        if not 2 <= n_active <= basis.spec.N:
            raise DimensionError(f"radial_size must lie in [2, {basis.spec.N}], got {n_active}")
        self.basis = basis
        self.m = m
        self.parity = parity
        self.mu = float(mu)
        self.wall_kind = wall_kind
        self.disk_kind = disk_kind
        self.corner = corner
        self.n_active = n_active

        self.beta = wall_row(basis, m, wall_kind)
        self.tau = disk_row(basis, parity, disk_kind)
        self.d2 = basis.z_derivative(parity, 2)[0]
        self.lr = basis.horizontal_laplacian(m)
        self._beta = self.beta[:n_active]
        self._lr = self.lr[:n_active, :n_active]
        if corner == "disk":
            self._build_disk_dominant()
        else:
            self._build_wall_dominant()
        logger.debug(
            "Helmholtz operator m=%s p=%s mu=%.3e wall=%s disk=%s corner=%s",
            m,
            parity,
            self.mu,
            wall_kind,
            disk_kind,
            corner,
        )

    @property
    def replaced_rows(self) -> str:
        if self.corner == "disk":
            return "z rows k=last for all j; r rows j=last for k<last"
        return "r rows j=last for all k; z rows k=last for j<last"

    # -------------------------------------------------------------------------
    # factorisation
    # -------------------------------------------------------------------------

    def _build_disk_dominant(self) -> None:
        kp = self.tau.size
        tau_last = self.tau[-1]
        lift = np.vstack([np.eye(kp - 1), -self.tau[None, :-1] / tau_last])
        self._lift = lift
        self._unit = np.zeros(kp)
        self._unit[-1] = 1.0 / tau_last
        reduced = (self.d2 @ lift)[:-1]
        self._d2_unit = (self.d2 @ self._unit)[:-1]
        eigvals, eigvecs = linalg.eig(reduced)
        self._eigvals = eigvals
        self._eigvecs = eigvecs
        self._eigvecs_inv = linalg.inv(eigvecs)
        n = self.n_active
        self._factors: List[Tuple] = []
        for lam in eigvals:
            block = (self.mu - lam) * np.eye(n) - self._lr
            block = block.astype(complex)
            block[-1] = self._beta
            self._factors.append(_factor(block, f"Helmholtz block (m={self.m}, p={self.parity})"))

    def _build_wall_dominant(self) -> None:
        n = self.n_active
        beta_last = self._beta[-1]
        lift = np.vstack([np.eye(n - 1), -self._beta[None, :-1] / beta_last])
        self._lift = lift
        self._unit = np.zeros(n)
        self._unit[-1] = 1.0 / beta_last
        reduced = (self._lr @ lift)[:-1]
        self._lr_unit = (self._lr @ self._unit)[:-1]
        eigvals, eigvecs = linalg.eig(reduced.T)
        self._eigvals = eigvals
        self._eigvecs = eigvecs
        self._eigvecs_inv = linalg.inv(eigvecs)
        kp = self.tau.size
        self._factors = []
        for lam in eigvals:
            block = (self.mu - lam) * np.eye(kp) - self.d2
            block = block.astype(complex)
            block[-1] = self.tau
            self._factors.append(_factor(block, f"Helmholtz block (m={self.m}, p={self.parity})"))

    # -------------------------------------------------------------------------
    # solve
    # -------------------------------------------------------------------------

    def solve(
        self,
        rhs: SpectralField,
        wall: Optional[np.ndarray] = None,
        disk: Optional[np.ndarray] = None,
    ) -> SpectralField:
        """
        Solve (mu - Delta) f = rhs.

        Args:
            rhs: Right-hand side in the (m, parity) block
            wall: Wall data over the parity's Chebyshev functions (zero if None)
            disk: Disk data over the radial functions (zero if None)

        Returns:
            Solution field
        """
        if rhs.m != self.m or rhs.parity != self.parity or rhs.ell != self.m:
            raise DimensionError(
                f"Right-hand side (m={rhs.m}, p={rhs.parity}) does not match operator "
                f"(m={self.m}, p={self.parity})"
            )
        kp, n = rhs.coeffs.shape
        a = np.zeros(kp, complex) if wall is None else np.asarray(wall, complex)
        b = np.zeros(n, complex) if disk is None else np.asarray(disk, complex)
        if a.shape != (kp,) or b.shape != (n,):
            raise DimensionError(f"Boundary data shapes {a.shape}, {b.shape} != ({kp},), ({n},)")
        ne = self.n_active
        coeffs = np.zeros((kp, n), complex)
        if self.corner == "disk":
            coeffs[:, :ne] = self._solve_disk_dominant(rhs.coeffs[:, :ne], a, b[:ne])
        else:
            coeffs[:, :ne] = self._solve_wall_dominant(rhs.coeffs[:, :ne], a, b[:ne])
        return SpectralField(self.m, self.parity, coeffs)

    def _solve_disk_dominant(self, r: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        rhs_top = r[:-1] + np.outer(self._d2_unit, b)
        transformed = self._eigvecs_inv @ rhs_top
        wall_t = self._eigvecs_inv @ a[:-1]
        y = np.empty_like(transformed)
        for e, factor in enumerate(self._factors):
            vec = transformed[e].copy()
            vec[-1] = wall_t[e]
            y[e] = linalg.lu_solve(factor, vec)
        reduced = self._eigvecs @ y
        return self._lift @ reduced + np.outer(self._unit, b)

    def _solve_wall_dominant(self, r: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        rhs_left = r[:, :-1] + np.outer(a, self._lr_unit)
        transformed = rhs_left @ self._eigvecs
        disk_t = b[:-1] @ self._eigvecs
        z = np.empty_like(transformed)
        for e, factor in enumerate(self._factors):
            vec = transformed[:, e].copy()
            vec[-1] = disk_t[e]
            z[:, e] = linalg.lu_solve(factor, vec)
        reduced = z @ self._eigvecs_inv
        return reduced @ self._lift.T + np.outer(a, self._unit)

    # -------------------------------------------------------------------------
    # checks
    # -------------------------------------------------------------------------

    def apply(self, field: SpectralField) -> SpectralField:
        """(mu - Delta) f without boundary rows."""
        out = self.mu * field.coeffs - self.d2 @ field.coeffs - field.coeffs @ self.lr.T
        return SpectralField(self.m, self.parity, out)

    def interior_mask(self) -> np.ndarray:
        """Boolean mask of the equation rows kept by the tau method."""
        kp, n = self.tau.size, self.beta.size
        mask = np.zeros((kp, n), dtype=bool)
        mask[:-1, : self.n_active - 1] = True
        return mask

    def boundary_traces(self, field: SpectralField) -> Tuple[np.ndarray, np.ndarray]:
        """Wall and disk traces of the quantities the boundary rows constrain."""
        return field.coeffs @ self.beta, self.tau @ field.coeffs


def solve_helmholtz(
    op: HelmholtzOperator,
    rhs: SpectralField,
    bcs: Tuple[BoundaryCondition, ...],
) -> SpectralField:
    """Convenience wrapper taking BoundaryCondition objects."""
    wall = disk = None
    for bc in bcs:
        if bc.location == "wall":
            if bc.kind != op.wall_kind:
                raise DimensionError(f"Operator wall kind {op.wall_kind} != {bc.kind}")
            wall = bc.data
        elif bc.location == "disk":
            if bc.kind != op.disk_kind:
                raise DimensionError(f"Operator disk kind {op.disk_kind} != {bc.kind}")
            disk = bc.data
        else:
            raise DimensionError("The Helmholtz problem takes no axis condition")
    return op.solve(rhs, wall=wall, disk=disk)


# =============================================================================
# HORIZONTAL POISSON
# =============================================================================


class HorizontalPoisson:
    """
    Delta_h f = rhs for every Chebyshev coefficient independently.

    Args:
        kind: "dirichlet" or "neumann" at r=1, or "axis" (value at r=0, m=0 only)
    """

    def __init__(self, basis: SpectralBasis, m: int, kind: str):
        if kind == "neumann" and m == 0:
            raise SolvabilityError(
                "Delta_h with a Neumann condition is singular for m=0; use the axis gauge "
                "together with the integral constraint"
            )
        if kind == "axis" and m != 0:
            raise DimensionError("The axis value is only a condition for m=0")
        self.basis = basis
        self.m = m
        self.kind = kind
        rows = basis.radial_rows(m)
        self.row = {"dirichlet": rows["value"], "neumann": rows["slope"], "axis": rows["axis"]}[
            kind
        ]
        matrix = basis.horizontal_laplacian(m).astype(complex)
        matrix[-1] = self.row
        self._factor = _factor(matrix, f"Horizontal Laplacian (m={m}, {kind})")

    def solve(self, rhs: SpectralField, data: Optional[np.ndarray] = None) -> SpectralField:
        if rhs.m != self.m or rhs.ell != self.m:
            raise DimensionError(f"Right-hand side mode {rhs.m} != {self.m}")
        kp = rhs.coeffs.shape[0]
        values = np.zeros(kp, complex) if data is None else np.asarray(data, complex)
        system = rhs.coeffs.T.copy()
        system[-1] = values
        return SpectralField(self.m, rhs.parity, linalg.lu_solve(self._factor, system).T)


def solve_poisson_h(
    basis: SpectralBasis, rhs: SpectralField, bc: BoundaryCondition
) -> SpectralField:
    """Delta_h f = rhs with one radial condition."""
    if bc.location == "axis":
        kind = "axis"
    elif bc.location == "wall" and bc.kind in ("dirichlet", "neumann"):
        kind = bc.kind
    else:
        raise DimensionError(f"Unsupported horizontal condition {bc.location}/{bc.kind}")
    return HorizontalPoisson(basis, rhs.m, kind).solve(rhs, bc.data)


# =============================================================================
# DENSE ORACLE
# =============================================================================


@dataclass
class DenseSystem:
    """
    Kronecker collocation form of a Helmholtz operator.

    Unknowns are the coefficients in row-major (k, j) order. The right-hand
    side is rhs_map @ vec(R) + wall_map @ wall + disk_map @ disk.
    """

    matrix: np.ndarray
    rhs_map: np.ndarray
    wall_map: np.ndarray
    disk_map: np.ndarray

    def solve(
        self, rhs: np.ndarray, wall: Optional[np.ndarray] = None, disk: Optional[np.ndarray] = None
    ) -> np.ndarray:
        kp, n = rhs.shape
        wall = np.zeros(kp) if wall is None else wall
        disk = np.zeros(n) if disk is None else disk
        vector = self.rhs_map @ rhs.ravel() + self.wall_map @ wall + self.disk_map @ disk
        return np.linalg.solve(self.matrix, vector).reshape(kp, n)


def dense_system(op: HelmholtzOperator) -> DenseSystem:
    kp, n = op.tau.size, op.beta.size
    ne = op.n_active
    size = kp * n
    full = op.mu * np.eye(size) - np.kron(op.d2, np.eye(n)) - np.kron(np.eye(kp), op.lr)
    matrix = np.zeros((size, size), complex)
    rhs_map = np.zeros((size, size))
    wall_map = np.zeros((size, kp))
    disk_map = np.zeros((size, n))
    for k in range(kp):
        for j in range(n):
            row = k * n + j
            if j >= ne:
                matrix[row, row] = 1.0
                continue
            interior = k < kp - 1 and j < ne - 1
            if interior:
                matrix[row] = full[row]
                rhs_map[row, row] = 1.0
                continue
            on_wall = j == ne - 1 and (op.corner == "wall" or k < kp - 1)
            if on_wall:
                matrix[row, k * n : (k + 1) * n] = op.beta
                wall_map[row, k] = 1.0
            else:
                matrix[row, j::n] = op.tau
                disk_map[row, j] = 1.0
    return DenseSystem(matrix, rhs_map, wall_map, disk_map)


def dense_horizontal_system(
    basis: SpectralBasis, poisson: HorizontalPoisson, kp: int
) -> np.ndarray:
    """Kronecker matrix of a HorizontalPoisson solve over kp Chebyshev rows."""
    block = basis.horizontal_laplacian(poisson.m).astype(complex)
    block[-1] = poisson.row
    return np.kron(np.eye(kp), block)
