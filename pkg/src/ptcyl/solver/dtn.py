"""
DtN - Exterior Dirichlet-to-Neumann map of the finite cylinder

The vacuum potential outside the cylinder is represented, mode by mode, as
a potential of ring sources placed on a contour retracted by a depth delta
inside the boundary. The ring kernel

    G_m(r, z; r', z') = 1/(4 pi) * integral over alpha of cos(m alpha) / D,
    D^2 = r^2 + r'^2 - 2 r r' cos(alpha) + (z - z')^2

decays at infinity and is harmonic outside the source contour, so fitting
the ring strengths to boundary values gives the exterior harmonic
extension; its gradient at the boundary is the DtN output.

Boundary values are given spectrally (Chebyshev coefficients on the wall,
radial coefficients on the top disk; the bottom disk follows from parity)
and the normal derivatives are returned in the same bases.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg, special

from .errors import DtnError
from .spectral import SpectralBasis, chebyshev_indices, radial_values

logger = logging.getLogger(__name__)

RCOND = 1e-13
MIN_RANK_FRACTION = 0.1
# targets per batch when tabulating kernels
CHUNK = 64


def default_source_depth(h: float) -> float:
    return 0.15 * min(1.0, 0.5 * h)


def ring_kernel(
    m: int,
    targets: np.ndarray,
    sources: np.ndarray,
    n_alpha: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Ring potential and its target gradient.

    Args:
        targets: Array (T, 2) of (r, z) points
        sources: Array (S, 2) of (r, z) ring positions

    Returns:
        Tuple (G, dG/dr, dG/dz), each of shape (T, S)
    """
    alpha = 2.0 * np.pi * np.arange(n_alpha) / n_alpha
    cos_a = np.cos(alpha)
    weights = np.cos(m * alpha) / (2.0 * n_alpha)
    rs, zs = sources[:, 0][None, :, None], sources[:, 1][None, :, None]
    out = [np.empty((targets.shape[0], sources.shape[0])) for _ in range(3)]
    for start in range(0, targets.shape[0], CHUNK):
        chunk = targets[start : start + CHUNK]
        rt, zt = chunk[:, 0][:, None, None], chunk[:, 1][:, None, None]
        d2 = rt**2 + rs**2 - 2.0 * rt * rs * cos_a + (zt - zs) ** 2
        inv = 1.0 / np.sqrt(d2)
        inv3 = inv**3
        out[0][start : start + CHUNK] = inv @ weights
        out[1][start : start + CHUNK] = (-(rt - rs * cos_a) * inv3) @ weights
        out[2][start : start + CHUNK] = (-(zt - zs) * inv3) @ weights
    return out[0], out[1], out[2]


@dataclass(frozen=True)
class BoundaryGrid:
    """
    Collocation points on the meridional boundary.

    Targets are ordered wall, top disk, bottom disk; the sources sit at
    depth delta along the inward normal of their target.
    """

    h: float
    wall_z: np.ndarray
    disk_r: np.ndarray
    depth: float

    @classmethod
    def create(cls, h: float, wall_points: int, disk_points: int, depth: float) -> "BoundaryGrid":
        xw, _ = legendre.leggauss(wall_points)
        xd, _ = legendre.leggauss(disk_points)
        return cls(h=h, wall_z=0.5 * h * xw, disk_r=0.5 * (1.0 + xd), depth=depth)

    @property
    def targets(self) -> np.ndarray:
        top = 0.5 * self.h
        wall = np.column_stack([np.ones_like(self.wall_z), self.wall_z])
        upper = np.column_stack([self.disk_r, np.full_like(self.disk_r, top)])
        lower = np.column_stack([self.disk_r, np.full_like(self.disk_r, -top)])
        return np.vstack([wall, upper, lower])

    @property
    def normals(self) -> np.ndarray:
        nw, nd = self.wall_z.size, self.disk_r.size
        return np.vstack(
            [
                np.tile([1.0, 0.0], (nw, 1)),
                np.tile([0.0, 1.0], (nd, 1)),
                np.tile([0.0, -1.0], (nd, 1)),
            ]
        )

    @property
    def sources(self) -> np.ndarray:
        return self.targets - self.depth * self.normals

    def sections(self) -> Dict[str, slice]:
        nw, nd = self.wall_z.size, self.disk_r.size
        return {
            "wall": slice(0, nw),
            "top": slice(nw, nw + nd),
            "bottom": slice(nw + nd, nw + 2 * nd),
        }


class RingDensitySolver:
    """
    Truncated-SVD factorisation of the ring-source collocation matrix of one mode.

    Attributes:
        m: Azimuthal wavenumber
        grid: Boundary collocation grid
        rank: Numerical rank retained
    """

    def __init__(self, m: int, grid: BoundaryGrid, n_alpha: int = 0):
        self.m = m
        self.grid = grid
        if n_alpha <= 0:
            n_alpha = max(64, int(np.ceil(16.0 * np.pi / grid.depth)))
        self.n_alpha = n_alpha
        targets, sources = grid.targets, grid.sources
        g, gr, gz = ring_kernel(m, targets, sources, n_alpha)
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(gr)) and np.all(np.isfinite(gz))):
            raise DtnError(f"Ring kernel for m={m} is not finite (source depth {grid.depth})")
        self.gradient_r = gr
        self.gradient_z = gz
        u, s, vh = linalg.svd(g, full_matrices=False)
        keep = s > RCOND * s[0] if s.size and s[0] > 0 else np.zeros(s.size, dtype=bool)
        self.rank = int(keep.sum())
        if self.rank < MIN_RANK_FRACTION * s.size:
            raise DtnError(
                f"Ring density system for m={m} has rank {self.rank} of {s.size}; "
                "increase the source depth or the number of boundary points"
            )
        self._u, self._s, self._vh = u[:, keep], s[keep], vh[keep]
        logger.debug(
            "Ring density m=%s: %d targets, rank %d, singular range %.3e..%.3e",
            m,
            targets.shape[0],
            self.rank,
            self._s[0],
            self._s[-1],
        )

    def density(self, values: np.ndarray) -> np.ndarray:
        s = self._s.reshape((-1,) + (1,) * (np.ndim(values) - 1))
        return self._vh.conj().T @ ((self._u.conj().T @ values) / s)

    def gradients(self, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(d/dr, d/dz) of the exterior extension at every target."""
        sigma = self.density(values)
        return self.gradient_r @ sigma, self.gradient_z @ sigma

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        """Outward normal derivative at every target from boundary values."""
        dr, dz = self.gradients(values)
        normals = self.grid.normals
        return normals[:, 0] * dr + normals[:, 1] * dz


class DtnMap:
    """
    Spectral DtN map of one (m, parity) block.

    Inputs are wall Chebyshev coefficients of the parity and radial
    coefficients on the top disk; outputs are F_r at the wall and F_z at
    the top disk in the same bases.
    """

    def __init__(self, m: int, parity: str, kp: int, matrix: np.ndarray):
        self.m = m
        self.parity = parity
        self.kp = kp
        self.matrix = matrix

    @classmethod
    def build(
        cls, basis: SpectralBasis, m: int, parity: str, solver: RingDensitySolver
    ) -> "DtnMap":
        spec = basis.spec
        grid = solver.grid
        sections = grid.sections()
        k_idx = chebyshev_indices(spec.K, parity)
        wall_t = basis.chebyshev_matrix(2.0 * grid.wall_z / spec.h, parity)
        disk_q = radial_values(m, spec.N, grid.disk_r)
        sign = 1.0 if parity == "s" else -1.0

        kp, n = k_idx.size, spec.N
        synth = np.zeros((grid.targets.shape[0], kp + n))
        synth[sections["wall"], :kp] = wall_t
        synth[sections["top"], kp:] = disk_q
        synth[sections["bottom"], kp:] = sign * disk_q
        density = solver.density(synth)
        dr_wall = solver.gradient_r[sections["wall"]] @ density
        dz_top = solver.gradient_z[sections["top"]] @ density
        fit_wall = np.linalg.pinv(wall_t)
        fit_disk = np.linalg.pinv(disk_q)
        return cls(m, parity, kp, np.vstack([fit_wall @ dr_wall, fit_disk @ dz_top]))

    def apply(self, wall: np.ndarray, disk: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Args:
            wall: Chebyshev coefficients of the potential on r = 1
            disk: Radial coefficients of the potential on z = +h/2

        Returns:
            Tuple (F_r wall coefficients, F_z top-disk coefficients)
        """
        out = self.matrix @ np.concatenate([wall, disk])
        return out[: self.kp], out[self.kp :]


def build_dtn(
    basis: SpectralBasis,
    wall_points: int = 0,
    disk_points: int = 0,
    source_depth: float = 0.0,
) -> Dict[Tuple[int, str], DtnMap]:
    """DtN maps for every retained (m, parity) block."""
    spec = basis.spec
    grid = BoundaryGrid.create(
        spec.h,
        wall_points or 2 * spec.K,
        disk_points or 2 * spec.N + spec.M // 2,
        source_depth or default_source_depth(spec.h),
    )
    maps = {}
    for m in spec.modes:
        solver = RingDensitySolver(m, grid)
        for parity in ("s", "a"):
            maps[(m, parity)] = DtnMap.build(basis, m, parity, solver)
    logger.info(
        "Built DtN maps for %d modes (%d wall, %d disk points, depth %.3f)",
        len(spec.modes),
        grid.wall_z.size,
        grid.disk_r.size,
        grid.depth,
    )
    return maps


# =============================================================================
# SPHERICAL EXPANSION DIAGNOSTIC
# =============================================================================


def contour_points(h: float, count: int) -> np.ndarray:
    """Arclength midpoints along bottom disk, wall and top disk."""
    length = 2.0 + h
    s = (np.arange(count) + 0.5) * length / count
    points = np.empty((count, 2))
    for i, si in enumerate(s):
        if si < 1.0:
            points[i] = (si, -0.5 * h)
        elif si < 1.0 + h:
            points[i] = (1.0, si - 1.0 - 0.5 * h)
        else:
            points[i] = (length - si, 0.5 * h)
    return points


def spherical_condition(m: int, h: float, count: int) -> float:
    """
    Condition number of the exterior spherical-harmonic collocation matrix.

    Rows are contour points and columns the decaying harmonics
    rho^-(l+1) P_l^m(cos xi) for l = m .. m + count - 1.
    """
    points = contour_points(h, count)
    rho = np.hypot(points[:, 0], points[:, 1])
    cos_xi = points[:, 1] / rho
    degrees = np.arange(m, m + count)
    decay = rho[:, None] ** (-(degrees[None, :] + 1.0))
    matrix = decay * special.lpmv(m, degrees[None, :], cos_xi[:, None])
    return float(np.linalg.cond(matrix))


def spherical_conditioning(m: int, h: float, counts) -> Dict[int, float]:
    return {int(count): spherical_condition(m, h, int(count)) for count in counts}


# =============================================================================
# ANALYTIC EXTERIOR HARMONICS
# =============================================================================

# name -> azimuthal wavenumber
HARMONICS = {"monopole": 0, "axial_dipole": 0, "dipole": 1}


def exterior_harmonic(name: str, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Mode amplitude of a field harmonic outside the origin and its gradient.

    monopole is 1/rho, axial_dipole z/rho^3 and dipole the m = 1 amplitude
    r/rho^3 of x/rho^3.

    Returns:
        Tuple (value, d/dr, d/dz) at every (r, z) point
    """
    r, z = points[:, 0], points[:, 1]
    rho2 = r**2 + z**2
    rho = np.sqrt(rho2)
    inv3 = rho ** -3
    inv5 = rho ** -5
    if name == "monopole":
        return 1.0 / rho, -r * inv3, -z * inv3
    if name == "axial_dipole":
        return z * inv3, -3.0 * r * z * inv5, inv3 - 3.0 * z**2 * inv5
    if name == "dipole":
        return r * inv3, inv3 - 3.0 * r**2 * inv5, -3.0 * r * z * inv5
    raise ValueError(f"Unknown harmonic {name!r}; expected one of {sorted(HARMONICS)}")


def harmonic_error(
    name: str, h: float, wall_points: int, disk_points: int, depth: float = 0.0
) -> float:
    """Largest normal-derivative error of the ring-source extension, relative to the exact one."""
    grid = BoundaryGrid.create(h, wall_points, disk_points, depth or default_source_depth(h))
    solver = RingDensitySolver(HARMONICS[name], grid)
    values, d_r, d_z = exterior_harmonic(name, grid.targets)
    normals = grid.normals
    exact = normals[:, 0] * d_r + normals[:, 1] * d_z
    approx = solver.apply_values(values)
    return float(np.abs(approx - exact).max() / np.abs(exact).max())
