"""
Spectral - Bases, transforms and operators on the meridional half-slice

A scalar is stored per azimuthal mode m and axial parity p as a coefficient
array c[k, j] over

    T_k(2z/h) * Q_j^l(r),    Q_j^l(r) = r^l P_j^(0,l)(2r^2 - 1)

where only the Chebyshev indices of the parity are kept (even k for "s",
odd k for "a") and l is the regularity index of the radial functions
(l = m for scalars). The radial function with index j corresponds to the
classical radial degree n = m + 2j, so n >= m and n + m is even.

Vector fields are stored as spin components

    u_plus  = u_r + i u_theta   (regularity index m + 1)
    u_minus = u_r - i u_theta   (regularity index |m - 1|)
    u_z                          (regularity index m)

which keeps every radial operator exact in the truncated polynomial space.

Usage:
    from ptcyl.solver.spectral import BasisSpec, SpectralBasis

    basis = SpectralBasis(BasisSpec(M=4, K=16, N=12, h=2.0))
    field = basis.zeros(m=1, parity="s")
    values = basis.synthesize(field)
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from numpy.polynomial import chebyshev, legendre
from scipy import linalg, special

from .errors import ConditioningError, DimensionError

logger = logging.getLogger(__name__)

PARITIES = ("s", "a")

OPERATORS = ("dr", "dz", "dtheta_over_r", "lap_h", "lap", "dr_plus", "lap_plus")


def other_parity(parity: str) -> str:
    """Return the opposite axial parity."""
    if parity not in PARITIES:
        raise DimensionError(f"Unknown parity: {parity!r}")
    return "a" if parity == "s" else "s"


def chebyshev_indices(K: int, parity: str) -> np.ndarray:
    """Chebyshev indices k < K carried by a field of the given parity."""
    if parity not in PARITIES:
        raise DimensionError(f"Unknown parity: {parity!r}")
    return np.arange(0 if parity == "s" else 1, K, 2)


# =============================================================================
# RADIAL FUNCTIONS
# =============================================================================


def jacobi_s_derivative(ell: int, count: int, x: np.ndarray, order: int = 0) -> np.ndarray:
    """
    Derivatives in s = (1 + x) / 2 of P_j^(0,ell)(x) for j < count.

    Returns:
        Array of shape (len(x), count)
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((x.size, count))
    j = np.arange(count)
    valid = j >= order
    if not valid.any():
        return out
    jv = j[valid]
    factor = np.ones(jv.size)
    for i in range(1, order + 1):
        factor *= jv + ell + i
    jacobi = special.eval_jacobi(jv[None, :] - order, order, ell + order, x[:, None])
    out[:, valid] = factor * jacobi
    return out


def radial_values(ell: int, count: int, r: np.ndarray, order: int = 0) -> np.ndarray:
    """
    Values of Q_j^ell(r) or of its first/second radial derivative.

    Args:
        ell: Regularity index
        count: Number of radial functions
        r: Evaluation radii in [0, 1]
        order: Derivative order (0, 1 or 2)

    Returns:
        Array of shape (len(r), count)
    """
    if order not in (0, 1, 2):
        raise DimensionError(f"Radial derivative order {order} is not supported")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    x = 2.0 * r**2 - 1.0
    col = r[:, None]
    p0 = jacobi_s_derivative(ell, count, x, 0)
    if order == 0:
        return col**ell * p0
    p1 = jacobi_s_derivative(ell, count, x, 1)
    if order == 1:
        out = 2.0 * col ** (ell + 1) * p1
        if ell >= 1:
            out += ell * col ** (ell - 1) * p0
        return out
    p2 = jacobi_s_derivative(ell, count, x, 2)
    out = (4 * ell + 2) * col**ell * p1 + 4.0 * col ** (ell + 2) * p2
    if ell >= 2:
        out += ell * (ell - 1) * col ** (ell - 2) * p0
    return out


# =============================================================================
# TYPES
# =============================================================================


@dataclass(frozen=True)
class BasisSpec:
    """
    Resolution and geometry of the cylinder 0 <= r <= 1, |z| <= h/2.

    Attributes:
        M: Maximum azimuthal wavenumber parameter (modes 0..M//2 are kept)
        K: Number of Chebyshev polynomials in z
        N: Number of radial functions per mode
        h: Cylinder height
    """

    M: int
    K: int
    N: int
    h: float

    def __post_init__(self):
        if self.M < 0:
            raise DimensionError(f"M must be non-negative, got {self.M}")
        if self.K < 4:
            raise DimensionError(f"K must be at least 4, got {self.K}")
        if self.N < 2:
            raise DimensionError(f"N must be at least 2, got {self.N}")
        if not self.h > 0:
            raise DimensionError(f"h must be positive, got {self.h}")

    @property
    def modes(self) -> Tuple[int, ...]:
        return tuple(range(self.M // 2 + 1))

    def parity_size(self, parity: str) -> int:
        return len(chebyshev_indices(self.K, parity))


@dataclass(eq=False)
class SpectralField:
    """
    Coefficients of one scalar for a single (m, parity) block.

    Attributes:
        m: Azimuthal wavenumber
        parity: "s" (even Chebyshev indices) or "a" (odd indices)
        coeffs: Complex array of shape (parity size, N)
        ell: Regularity index of the radial functions (defaults to m)
    """

    m: int
    parity: str
    coeffs: np.ndarray
    ell: Optional[int] = None

    def __post_init__(self):
        if self.parity not in PARITIES:
            raise DimensionError(f"Unknown parity: {self.parity!r}")
        if self.ell is None:
            self.ell = self.m
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim != 2:
            raise DimensionError(f"Coefficient array must be 2-D, got {self.coeffs.shape}")

    def _check(self, other: "SpectralField") -> None:
        if (self.m, self.parity, self.ell, self.coeffs.shape) != (
            other.m,
            other.parity,
            other.ell,
            other.coeffs.shape,
        ):
            raise DimensionError(
                "Incompatible fields: (m=%s, p=%s, l=%s, %s) vs (m=%s, p=%s, l=%s, %s)"
                % (
                    self.m,
                    self.parity,
                    self.ell,
                    self.coeffs.shape,
                    other.m,
                    other.parity,
                    other.ell,
                    other.coeffs.shape,
                )
            )

    def _new(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.m, self.parity, coeffs, self.ell)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return self._new(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return self._new(self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return self._new(self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "SpectralField":
        return self._new(self.coeffs / scalar)

    def __neg__(self) -> "SpectralField":
        return self._new(-self.coeffs)

    def copy(self) -> "SpectralField":
        return self._new(self.coeffs.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True)
class VectorFieldSlices:
    """
    Spin components of a vector field for one (m, parity) block.

    The parity is the one of the horizontal components; u_z carries the
    opposite parity.
    """

    plus: SpectralField
    minus: SpectralField
    axial: SpectralField

    @property
    def m(self) -> int:
        return self.plus.m

    def norm(self) -> float:
        parts = (self.plus.norm(), self.minus.norm(), self.axial.norm())
        return float(np.sqrt(sum(part**2 for part in parts)))


# =============================================================================
# BASIS
# =============================================================================


class SpectralBasis:
    """
    Transforms and dense operator matrices for a BasisSpec.

    Radial collocation uses the N Gauss-Legendre nodes in x = 2r^2 - 1,
    which exclude the axis; the z grid is the K Gauss-Lobatto points over
    the full height.
    """

    def __init__(self, spec: BasisSpec):
        self.spec = spec
        x, weights = legendre.leggauss(spec.N)
        self._x = x
        self._s = (1.0 + x) / 2.0
        self._weights = weights
        self.r_nodes = np.sqrt(self._s)
        self.zeta_nodes = np.cos(np.pi * np.arange(spec.K) / (spec.K - 1))
        self.z_nodes = 0.5 * spec.h * self.zeta_nodes

        d1 = np.zeros((spec.K, spec.K))
        for k in range(1, spec.K):
            unit = np.zeros(spec.K)
            unit[k] = 1.0
            der = chebyshev.chebder(unit)
            d1[: der.size, k] = der * (2.0 / spec.h)
        self._d1_full = d1
        self._cache: Dict[tuple, object] = {}

    # -------------------------------------------------------------------------
    # bookkeeping
    # -------------------------------------------------------------------------

    def indices(self, parity: str) -> np.ndarray:
        return chebyshev_indices(self.spec.K, parity)

    def size(self, parity: str) -> int:
        return self.spec.parity_size(parity)

    def zeros(self, m: int, parity: str, ell: Optional[int] = None) -> SpectralField:
        return SpectralField(m, parity, np.zeros((self.size(parity), self.spec.N), complex), ell)

    def check_field(self, field: SpectralField) -> None:
        expected = (self.size(field.parity), self.spec.N)
        if field.coeffs.shape != expected:
            raise DimensionError(
                f"Field of shape {field.coeffs.shape} does not match basis {expected} "
                f"(m={field.m}, p={field.parity})"
            )
        if field.m not in self.spec.modes:
            raise DimensionError(f"Mode m={field.m} is not retained for M={self.spec.M}")

    # -------------------------------------------------------------------------
    # z-direction matrices
    # -------------------------------------------------------------------------

    def z_derivative(self, parity: str, order: int = 1) -> Tuple[np.ndarray, str]:
        """Chebyshev derivative matrix restricted to a parity; returns (matrix, output parity)."""
        out_parity = parity if order % 2 == 0 else other_parity(parity)
        key = ("dz", parity, order)
        if key not in self._cache:
            full = np.linalg.matrix_power(self._d1_full, order)
            self._cache[key] = full[np.ix_(self.indices(out_parity), self.indices(parity))]
        return self._cache[key], out_parity

    def chebyshev_matrix(self, zeta: np.ndarray, parity: str, order: int = 0) -> np.ndarray:
        """Values of d^order/dz^order T_k(2z/h) at points zeta = 2z/h."""
        vander = chebyshev.chebvander(np.atleast_1d(zeta), self.spec.K - 1)
        if order:
            vander = vander @ np.linalg.matrix_power(self._d1_full, order)
        return vander[:, self.indices(parity)]

    def chebyshev_rows(self, parity: str) -> Dict[str, np.ndarray]:
        """Boundary rows at z = +h/2: values and z-derivatives of T_k."""
        k = self.indices(parity).astype(float)
        return {"value": np.ones(k.size), "slope": k**2 * (2.0 / self.spec.h)}

    # -------------------------------------------------------------------------
    # radial matrices
    # -------------------------------------------------------------------------

    def poly_matrix(self, ell: int) -> np.ndarray:
        """P_j^(0,ell)(x_i) at the radial nodes."""
        key = ("poly", ell)
        if key not in self._cache:
            self._cache[key] = jacobi_s_derivative(ell, self.spec.N, self._x, 0)
        return self._cache[key]

    def _poly_solve(self, ell: int, values: np.ndarray) -> np.ndarray:
        key = ("poly_lu", ell)
        if key not in self._cache:
            matrix = self.poly_matrix(ell)
            cond = np.linalg.cond(matrix)
            if not np.isfinite(cond) or cond > 1e12:
                raise ConditioningError(
                    f"Radial Vandermonde for l={ell} is singular (condition {cond:.3e})"
                )
            self._cache[key] = linalg.lu_factor(matrix)
        return linalg.lu_solve(self._cache[key], values)

    def radial_vandermonde(self, ell: int) -> np.ndarray:
        """Q_j^ell(r_i) at the radial nodes."""
        return self.r_nodes[:, None] ** ell * self.poly_matrix(ell)

    def spin_matrix(self, ell: int, c: float) -> Tuple[np.ndarray, int]:
        """
        Matrix of D_c = d/dr + c/r acting on Q^ell.

        The result lives in Q^(ell-1) unless ell + c = 0, in which case it
        lives in Q^(ell+1).

        Returns:
            Tuple (matrix, output regularity index)
        """
        key = ("spin", ell, c)
        if key not in self._cache:
            n = self.spec.N
            p0 = self.poly_matrix(ell)
            p1 = jacobi_s_derivative(ell, n, self._x, 1)
            if ell + c == 0:
                ell_out = ell + 1
                values = 2.0 * p1
            elif ell >= 1:
                ell_out = ell - 1
                values = (ell + c) * p0 + 2.0 * self._s[:, None] * p1
            else:
                raise DimensionError(f"d/dr + {c}/r is singular on regularity index {ell}")
            self._cache[key] = (self._poly_solve(ell_out, values), ell_out)
        return self._cache[key]

    def horizontal_laplacian(self, ell: int) -> np.ndarray:
        """Matrix of Delta_h on Q^ell for a scalar of mode m = ell."""
        key = ("lap_h", ell)
        if key not in self._cache:
            n = self.spec.N
            p1 = jacobi_s_derivative(ell, n, self._x, 1)
            p2 = jacobi_s_derivative(ell, n, self._x, 2)
            values = 4.0 * self._s[:, None] * p2 + 4.0 * (ell + 1) * p1
            self._cache[key] = self._poly_solve(ell, values)
        return self._cache[key]

    def convert(self, ell_in: int, ell_out: int) -> np.ndarray:
        """Re-expand the polynomial part of Q^ell_in in the P^(0,ell_out) family."""
        key = ("convert", ell_in, ell_out)
        if key not in self._cache:
            self._cache[key] = self._poly_solve(ell_out, self.poly_matrix(ell_in))
        return self._cache[key]

    def radial_rows(self, ell: int) -> Dict[str, np.ndarray]:
        """
        Boundary rows over the radial functions.

        Keys: "value" Q_j(1), "slope" Q_j'(1), "axis" Q_j(0), "moment" the
        integral of r Q_j(r) over [0, 1].
        """
        key = ("rows", ell)
        if key not in self._cache:
            n = self.spec.N
            one = np.array([1.0])
            weighted = self._s[:, None] ** (0.5 * ell) * self.poly_matrix(ell)
            moment = 0.25 * self._weights @ weighted
            self._cache[key] = {
                "value": radial_values(ell, n, one)[0],
                "slope": radial_values(ell, n, one, order=1)[0],
                "axis": radial_values(ell, n, np.array([0.0]))[0],
                "moment": moment,
            }
        return self._cache[key]

    # -------------------------------------------------------------------------
    # transforms
    # -------------------------------------------------------------------------

    def synthesize(self, field: SpectralField) -> np.ndarray:
        """
        Physical values on the standard grid.

        Returns:
            Complex array of shape (K, N): rows are z_nodes, columns r_nodes
        """
        self.check_field(field)
        tz = self.chebyshev_matrix(self.zeta_nodes, field.parity)
        return tz @ field.coeffs @ self.radial_vandermonde(field.ell).T

    def analyze(
        self, values: np.ndarray, m: int, parity: str, ell: Optional[int] = None
    ) -> SpectralField:
        """Inverse of synthesize; least squares in z over the parity subspace."""
        values = np.asarray(values, dtype=complex)
        if values.shape != (self.spec.K, self.spec.N):
            raise DimensionError(
                f"Grid values of shape {values.shape} do not match ({self.spec.K}, {self.spec.N})"
            )
        ell = m if ell is None else ell
        tz = self.chebyshev_matrix(self.zeta_nodes, parity)
        along_z = np.linalg.lstsq(tz, values, rcond=None)[0]
        # divide out r^ell row-wise, then solve the polynomial Vandermonde
        poly_values = along_z / self.r_nodes[None, :] ** ell
        coeffs = self._poly_solve(ell, poly_values.T).T
        return SpectralField(m, parity, coeffs, ell)

    def evaluate(
        self,
        field: SpectralField,
        r: np.ndarray,
        z: np.ndarray,
        dr: int = 0,
        dz: int = 0,
    ) -> np.ndarray:
        """
        Values (or derivatives) at arbitrary points.

        Returns:
            Array of shape (len(z), len(r))
        """
        self.check_field(field)
        zeta = 2.0 * np.atleast_1d(np.asarray(z, dtype=float)) / self.spec.h
        tz = self.chebyshev_matrix(zeta, field.parity, dz)
        qr = radial_values(field.ell, self.spec.N, r, dr)
        return tz @ field.coeffs @ qr.T

    # -------------------------------------------------------------------------
    # operators
    # -------------------------------------------------------------------------

    def spin_derivative(self, field: SpectralField, c: float) -> SpectralField:
        matrix, ell_out = self.spin_matrix(field.ell, c)
        return SpectralField(field.m, field.parity, field.coeffs @ matrix.T, ell_out)

    def apply_operator(self, field: SpectralField, op: str) -> SpectralField:
        """
        Apply a differential operator exactly within the truncated space.

        Supported operators: dr, dz, dtheta_over_r, lap_h, lap, dr_plus
        (d/dr + 1/r) and lap_plus (d/dr dr_plus + d^2/dz^2).
        """
        self.check_field(field)
        if op == "dr":
            return self.spin_derivative(field, 0)
        if op == "dr_plus":
            return self.spin_derivative(field, 1)
        if op == "dz":
            matrix, parity = self.z_derivative(field.parity, 1)
            return SpectralField(field.m, parity, matrix @ field.coeffs, field.ell)
        if op == "dtheta_over_r":
            if field.m == 0 or field.ell == 0:
                return SpectralField(field.m, field.parity, np.zeros_like(field.coeffs), field.ell)
            matrix = self.convert(field.ell, field.ell - 1)
            return SpectralField(
                field.m, field.parity, 1j * field.m * field.coeffs @ matrix.T, field.ell - 1
            )
        if op in ("lap_h", "lap"):
            if field.ell != field.m:
                raise DimensionError(
                    f"Delta_h needs a scalar with l = m, got l={field.ell}, m={field.m}"
                )
            out = field.coeffs @ self.horizontal_laplacian(field.m).T
            if op == "lap":
                out = out + self.z_derivative(field.parity, 2)[0] @ field.coeffs
            return SpectralField(field.m, field.parity, out, field.ell)
        if op == "lap_plus":
            inner = self.spin_derivative(self.spin_derivative(field, 1), 0)
            if inner.ell != field.ell:
                raise DimensionError(f"lap_plus does not preserve l={field.ell}")
            out = inner.coeffs + self.z_derivative(field.parity, 2)[0] @ field.coeffs
            return SpectralField(field.m, field.parity, out, field.ell)
        raise DimensionError(f"Unknown operator {op!r}; expected one of {OPERATORS}")

    # -------------------------------------------------------------------------
    # boundary traces
    # -------------------------------------------------------------------------

    def wall_trace(self, field: SpectralField, slope: bool = False) -> np.ndarray:
        """Chebyshev coefficients of f(1, z) (or of df/dr at r=1)."""
        row = self.radial_rows(field.ell)["slope" if slope else "value"]
        return field.coeffs @ row

    def disk_trace(self, field: SpectralField) -> np.ndarray:
        """Radial coefficients of f(r, +h/2)."""
        return self.chebyshev_rows(field.parity)["value"] @ field.coeffs


# =============================================================================
# VECTOR IDENTITIES
# =============================================================================


def vector_from_potentials(
    basis: SpectralBasis, psi: SpectralField, phi: SpectralField
) -> VectorFieldSlices:
    """
    F = -e_z x grad_h psi + grad_h d_z phi - e_z Delta_h phi, as spin components.

    psi and phi must share m and carry opposite parities.
    """
    if psi.m != phi.m or psi.parity == phi.parity:
        raise DimensionError(
            f"Potentials must share m and have opposite parities: "
            f"(m={psi.m}, p={psi.parity}) vs (m={phi.m}, p={phi.parity})"
        )
    m = psi.m
    dz_phi = basis.apply_operator(phi, "dz")
    plus = basis.spin_derivative(dz_phi - 1j * psi, -m)
    minus = basis.spin_derivative(dz_phi + 1j * psi, m)
    axial = -basis.apply_operator(phi, "lap_h")
    return VectorFieldSlices(plus, minus, axial)


def horizontal_divergence(basis: SpectralBasis, vector: VectorFieldSlices) -> SpectralField:
    m = vector.m
    a = basis.spin_derivative(vector.plus, m + 1)
    b = basis.spin_derivative(vector.minus, 1 - m)
    return 0.5 * (a + b)


def divergence(basis: SpectralBasis, vector: VectorFieldSlices) -> SpectralField:
    return horizontal_divergence(basis, vector) + basis.apply_operator(vector.axial, "dz")


def curl_z(basis: SpectralBasis, vector: VectorFieldSlices) -> SpectralField:
    """e_z . curl of a vector field."""
    m = vector.m
    a = basis.spin_derivative(vector.plus, m + 1)
    b = basis.spin_derivative(vector.minus, 1 - m)
    return (a - b) / 2j


def neg_curl_curl_z(basis: SpectralBasis, vector: VectorFieldSlices) -> SpectralField:
    """-e_z . curl curl of a vector field: Delta_h F_z - d_z div_h F."""
    lap = basis.apply_operator(vector.axial, "lap_h")
    return lap - basis.apply_operator(horizontal_divergence(basis, vector), "dz")


def curl_of(
    basis: SpectralBasis, psi: SpectralField, phi: SpectralField
) -> Tuple[SpectralField, SpectralField]:
    """Potentials of curl F: (-Delta phi, psi)."""
    return -basis.apply_operator(phi, "lap"), psi.copy()


def laplacian_of(
    basis: SpectralBasis, psi: SpectralField, phi: SpectralField
) -> Tuple[SpectralField, SpectralField]:
    """Potentials of Delta F: (Delta psi, Delta phi)."""
    return basis.apply_operator(psi, "lap"), basis.apply_operator(phi, "lap")


def curl_laplacian_of(
    basis: SpectralBasis, psi: SpectralField, phi: SpectralField
) -> Tuple[SpectralField, SpectralField]:
    """Potentials of curl Delta F: (-Delta Delta phi, Delta psi)."""
    lap_phi = basis.apply_operator(phi, "lap")
    return -basis.apply_operator(lap_phi, "lap"), basis.apply_operator(psi, "lap")


def vector_energy(basis: SpectralBasis, vectors: Iterable[VectorFieldSlices]) -> float:
    """
    Half the integral of |F|^2 over the cylinder, by exact quadrature.

    Blocks of different (m, parity) are orthogonal, so contributions add.
    """
    spec = basis.spec
    total = 0.0
    zq, wz = legendre.leggauss(spec.K + 1)
    z = 0.5 * spec.h * zq
    wz = 0.5 * spec.h * wz
    for vector in vectors:
        m = vector.m
        xq, wx = legendre.leggauss(spec.N + m // 2 + 2)
        r = np.sqrt((1.0 + xq) / 2.0)
        wr = wx / 4.0
        density = 0.0
        for comp, factor in ((vector.plus, 0.5), (vector.minus, 0.5), (vector.axial, 1.0)):
            values = basis.evaluate(comp, r, z)
            density = density + factor * np.abs(values) ** 2
        weight = 1.0 if m == 0 else 2.0
        total += np.pi * weight * float(wz @ density @ wr)
    return total


# =============================================================================
# DEALIASED PHYSICAL GRID
# =============================================================================


class PhysicalGrid:
    """
    Padded (theta, z, r) grid for quadratic terms.

    theta uses 3*(M//2) + 1 points, z uses 2K Gauss-Chebyshev points and r
    uses 2N + M//2 + 1 Gauss points in s = r^2, so products of two
    band-limited fields are projected back without aliasing.
    """

    def __init__(self, basis: SpectralBasis):
        spec = basis.spec
        self.basis = basis
        self.mmax = spec.M // 2
        self.n_theta = 3 * self.mmax + 1
        xr, wr = legendre.leggauss(2 * spec.N + self.mmax + 1)
        self.r = np.sqrt((1.0 + xr) / 2.0)
        self.r_weights = wr / 4.0
        nz = 2 * spec.K
        self.zeta = np.cos(np.pi * (np.arange(nz) + 0.5) / nz)
        self.z = 0.5 * spec.h * self.zeta
        self._vander = chebyshev.chebvander(self.zeta, spec.K - 1)
        self._radial: Dict[int, np.ndarray] = {}

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.n_theta, self.z.size, self.r.size

    def evaluate(self, field: SpectralField, dr: int = 0, dz: int = 0) -> np.ndarray:
        return self.basis.evaluate(field, self.r, self.z, dr, dz)

    def to_physical(self, modes: Dict[int, np.ndarray]) -> np.ndarray:
        """Real values on (theta, z, r) from mode amplitudes f_m (m >= 0)."""
        spectrum = np.zeros((self.n_theta // 2 + 1,) + self.shape[1:], dtype=complex)
        for m, values in modes.items():
            spectrum[m] += values * self.n_theta
        return np.fft.irfft(spectrum, n=self.n_theta, axis=0)

    def to_modes(self, values: np.ndarray) -> Dict[int, np.ndarray]:
        spectrum = np.fft.rfft(values, axis=0) / self.n_theta
        return {m: spectrum[m] for m in range(self.mmax + 1)}

    def project(self, values: np.ndarray, ell: int) -> np.ndarray:
        """
        Project grid values of one mode onto T_k Q_j^ell.

        Returns:
            Coefficients over all K Chebyshev indices, shape (K, N)
        """
        nz = self.z.size
        along_z = (2.0 / nz) * (self._vander.T @ values)
        along_z[0] *= 0.5
        if ell not in self._radial:
            self._radial[ell] = radial_values(ell, self.basis.spec.N, self.r)
        sqrt_w = np.sqrt(self.r_weights)
        lhs = sqrt_w[:, None] * self._radial[ell]
        coeffs = linalg.lstsq(lhs, sqrt_w[:, None] * along_z.T)[0]
        return coeffs.T

    def split(self, coeffs: np.ndarray, m: int, ell: int) -> Dict[str, SpectralField]:
        """Split full Chebyshev coefficients into the two parity blocks."""
        return {
            parity: SpectralField(
                m, parity, coeffs[chebyshev_indices(coeffs.shape[0], parity)], ell
            )
            for parity in PARITIES
        }
