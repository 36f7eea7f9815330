import numpy as np
import pytest
from numpy.polynomial import legendre
from numpy.testing import assert_allclose

from ptcyl.solver.dtn import (
    HARMONICS,
    BoundaryGrid,
    RingDensitySolver,
    build_dtn,
    contour_points,
    default_source_depth,
    exterior_harmonic,
    harmonic_error,
    ring_kernel,
    spherical_conditioning,
)
from ptcyl.solver.errors import DtnError
from ptcyl.solver.spectral import BasisSpec, SpectralBasis, radial_values


def _make_grid(**kwargs):
    defaults = {"h": 2.0, "wall_points": 8, "disk_points": 5, "depth": 0.1}
    defaults.update(kwargs)
    return BoundaryGrid.create(**defaults)


# ---------------------------------------------------------------------------
# Ring kernel
# ---------------------------------------------------------------------------
class TestRingKernel:
    def test_collapsed_ring_is_point_source(self):
        targets = np.array([[3.0, 0.0], [0.0, 2.0]])
        sources = np.array([[0.0, 0.0]])
        g, g_r, g_z = ring_kernel(0, targets, sources, 64)
        assert_allclose(g[:, 0], [1.0 / 6.0, 1.0 / 4.0])
        assert_allclose(g_r[:, 0], [-1.0 / 18.0, 0.0], atol=1e-15)
        assert_allclose(g_z[:, 0], [0.0, -1.0 / 8.0], atol=1e-15)

    def test_collapsed_ring_has_no_azimuthal_modes(self):
        g, _, _ = ring_kernel(1, np.array([[3.0, 0.5]]), np.array([[0.0, 0.0]]), 64)
        assert abs(g[0, 0]) < 1e-15

    @pytest.mark.parametrize("m", [0, 1, 2])
    def test_gradient_matches_finite_differences(self, m):
        source = np.array([[0.8, 0.1]])
        point = np.array([1.5, 0.3])
        step = 1e-5
        _, g_r, g_z = ring_kernel(m, point[None, :], source, 256)
        dr = np.array([[step, 0.0]])
        dz = np.array([[0.0, step]])

        def value(target):
            return ring_kernel(m, target, source, 256)[0]

        assert_allclose(g_r, (value(point + dr) - value(point - dr)) / (2 * step), rtol=1e-6)
        assert_allclose(g_z, (value(point + dz) - value(point - dz)) / (2 * step), rtol=1e-6)


# ---------------------------------------------------------------------------
# Boundary grid
# ---------------------------------------------------------------------------
class TestBoundaryGrid:
    def test_default_depth(self):
        assert default_source_depth(2.0) == pytest.approx(0.15)
        assert default_source_depth(1.0) == pytest.approx(0.075)
        assert default_source_depth(4.0) == pytest.approx(0.15)

    def test_targets_and_sections(self):
        grid = _make_grid()
        targets = grid.targets
        sections = grid.sections()
        assert targets.shape == (18, 2)
        assert_allclose(targets[sections["wall"], 0], 1.0)
        assert_allclose(targets[sections["top"], 1], 1.0)
        assert_allclose(targets[sections["bottom"], 1], -1.0)

    def test_sources_retracted_inside(self):
        grid = _make_grid()
        sources = grid.sources
        sections = grid.sections()
        assert_allclose(sources[sections["wall"], 0], 0.9)
        assert_allclose(sources[sections["top"], 1], 0.9)
        assert_allclose(sources[sections["bottom"], 1], -0.9)

    def test_sources_on_boundary_rejected(self):
        with pytest.raises(DtnError):
            RingDensitySolver(0, _make_grid(depth=0.0), n_alpha=64)


# ---------------------------------------------------------------------------
# Exterior harmonics
# ---------------------------------------------------------------------------
class TestExteriorHarmonics:
    @pytest.mark.parametrize("name", sorted(HARMONICS))
    def test_gradient_matches_finite_differences(self, name):
        points = np.array([[1.0, 0.3], [0.4, 1.0], [1.2, -0.7]])
        step = 1e-6
        _, d_r, d_z = exterior_harmonic(name, points)
        for column, derivative in ((0, d_r), (1, d_z)):
            shift = np.zeros(2)
            shift[column] = step
            upper = exterior_harmonic(name, points + shift)[0]
            lower = exterior_harmonic(name, points - shift)[0]
            assert_allclose(derivative, (upper - lower) / (2 * step), rtol=1e-6)

    def test_unknown_harmonic(self):
        with pytest.raises(ValueError):
            exterior_harmonic("quadrupole", np.ones((1, 2)))

    @pytest.mark.slow
    @pytest.mark.parametrize("name", sorted(HARMONICS))
    def test_ring_extension_converges(self, name):
        coarse = harmonic_error(name, 2.0, 8, 6)
        fine = harmonic_error(name, 2.0, 32, 18)
        assert fine < coarse
        assert fine < 1e-3


# ---------------------------------------------------------------------------
# Spectral DtN map
# ---------------------------------------------------------------------------
class TestDtnMap:
    def test_blocks_and_shapes(self):
        basis = SpectralBasis(BasisSpec(M=2, K=8, N=6, h=2.0))
        maps = build_dtn(basis)
        assert set(maps) == {(0, "s"), (0, "a"), (1, "s"), (1, "a")}
        dtn = maps[(1, "a")]
        assert dtn.matrix.shape == (4 + 6, 4 + 6)
        f_r, f_z = dtn.apply(np.zeros(4), np.zeros(6))
        assert f_r.shape == (4,) and f_z.shape == (6,)
        assert_allclose(f_r, 0.0)

    @pytest.mark.slow
    def test_monopole_normal_derivatives(self):
        h = 2.0
        basis = SpectralBasis(BasisSpec(M=0, K=16, N=10, h=h))
        dtn = build_dtn(basis)[(0, "s")]
        z = 0.5 * h * legendre.leggauss(40)[0]
        r = 0.5 * (1.0 + legendre.leggauss(40)[0])
        wall_t = basis.chebyshev_matrix(2.0 * z / h, "s")
        disk_q = radial_values(0, basis.spec.N, r)

        def fit(matrix, values):
            return np.linalg.lstsq(matrix, values, rcond=None)[0]

        wall = fit(wall_t, 1.0 / np.hypot(1.0, z))
        disk = fit(disk_q, 1.0 / np.hypot(r, 0.5 * h))
        f_r, f_z = dtn.apply(wall, disk)
        exact_r = fit(wall_t, -1.0 / np.hypot(1.0, z) ** 3)
        exact_z = fit(disk_q, -0.5 * h / np.hypot(r, 0.5 * h) ** 3)
        assert np.abs(wall_t @ (f_r - exact_r)).max() < 1e-3
        assert np.abs(disk_q @ (f_z - exact_z)).max() < 1e-3


# ---------------------------------------------------------------------------
# Spherical-harmonic conditioning
# ---------------------------------------------------------------------------
class TestSphericalConditioning:
    def test_contour_points_on_boundary(self):
        points = contour_points(2.0, 20)
        on_wall = np.isclose(points[:, 0], 1.0)
        on_disk = np.isclose(np.abs(points[:, 1]), 1.0)
        assert np.all(on_wall | on_disk)

    @pytest.mark.parametrize("m", [0, 1])
    def test_condition_grows_with_degree(self, m):
        conditions = spherical_conditioning(m, 2.0, (4, 12, 20))
        assert list(conditions) == [4, 12, 20]
        assert conditions[20] > 10 * conditions[4]
