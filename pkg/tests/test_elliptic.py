import numpy as np
import pytest
from numpy.testing import assert_allclose

from ptcyl.solver.elliptic import (
    BoundaryCondition,
    HelmholtzOperator,
    HorizontalPoisson,
    apply_integral_constraint,
    dense_system,
    solve_helmholtz,
    solve_poisson_h,
)
from ptcyl.solver.errors import DimensionError, SolvabilityError
from ptcyl.solver.spectral import BasisSpec, SpectralBasis, SpectralField


def _make_basis(**kwargs):
    defaults = {"M": 2, "K": 8, "N": 6, "h": 2.0}
    defaults.update(kwargs)
    return SpectralBasis(BasisSpec(**defaults))


def _make_problem(basis, m, parity, seed=0):
    rng = np.random.default_rng(seed)
    kp, n = basis.size(parity), basis.spec.N
    rhs = SpectralField(m, parity, rng.standard_normal((kp, n)) * 0.5 ** np.arange(n))
    wall = rng.standard_normal(kp) * 0.5 ** np.arange(kp)
    disk = rng.standard_normal(n) * 0.5 ** np.arange(n)
    return rhs, wall, disk


# ---------------------------------------------------------------------------
# Boundary conditions
# ---------------------------------------------------------------------------
class TestBoundaryCondition:
    @pytest.mark.parametrize(
        "location,kind",
        [("lid", "dirichlet"), ("wall", "robin"), ("disk", "integral"), ("axis", "neumann")],
    )
    def test_invalid(self, location, kind):
        with pytest.raises(DimensionError):
            BoundaryCondition(location, kind)

    def test_integral_constraint_only_for_axisymmetric_mode(self):
        basis = _make_basis()
        row = apply_integral_constraint(basis, 0)
        assert row.shape == (basis.spec.N,)
        with pytest.raises(DimensionError):
            apply_integral_constraint(basis, 1)


# ---------------------------------------------------------------------------
# Helmholtz operator
# ---------------------------------------------------------------------------
class TestHelmholtzOperator:
    @pytest.mark.parametrize("corner", ["disk", "wall"])
    @pytest.mark.parametrize("m,parity", [(0, "s"), (0, "a"), (1, "s"), (2, "a")])
    def test_fast_solver_matches_dense_system(self, corner, m, parity):
        basis = _make_basis()
        rhs, wall, disk = _make_problem(basis, m, parity)
        op = HelmholtzOperator(basis, m, parity, mu=50.0, corner=corner)
        fast = op.solve(rhs, wall, disk)
        dense = dense_system(op).solve(rhs.coeffs, wall, disk)
        assert_allclose(fast.coeffs, dense, atol=1e-10 * np.abs(dense).max())

    @pytest.mark.parametrize("corner", ["disk", "wall"])
    def test_interior_equations_hold(self, corner):
        basis = _make_basis()
        rhs, wall, disk = _make_problem(basis, 1, "s", seed=1)
        op = HelmholtzOperator(basis, 1, "s", mu=20.0, corner=corner)
        solution = op.solve(rhs, wall, disk)
        mask = op.interior_mask()
        assert mask.sum() == (basis.size("s") - 1) * (basis.spec.N - 1)
        assert_allclose(op.apply(solution).coeffs[mask], rhs.coeffs[mask], atol=1e-9)

    def test_boundary_rows_follow_corner_convention(self):
        basis = _make_basis()
        rhs, wall, disk = _make_problem(basis, 0, "s", seed=2)

        op = HelmholtzOperator(basis, 0, "s", mu=10.0, corner="disk")
        wall_trace, disk_trace = op.boundary_traces(op.solve(rhs, wall, disk))
        assert_allclose(disk_trace, disk, atol=1e-10)
        assert_allclose(wall_trace[:-1], wall[:-1], atol=1e-10)

        op = HelmholtzOperator(basis, 0, "s", mu=10.0, corner="wall")
        wall_trace, disk_trace = op.boundary_traces(op.solve(rhs, wall, disk))
        assert_allclose(wall_trace, wall, atol=1e-10)
        assert_allclose(disk_trace[:-1], disk[:-1], atol=1e-10)

    def test_neumann_conditions(self):
        basis = _make_basis()
        rhs, wall, disk = _make_problem(basis, 1, "a", seed=3)
        op = HelmholtzOperator(basis, 1, "a", 30.0, wall_kind="neumann", disk_kind="neumann")
        fast = op.solve(rhs, wall, disk)
        assert_allclose(fast.coeffs, dense_system(op).solve(rhs.coeffs, wall, disk), atol=1e-9)

    def test_integral_constraint_with_disk_corner(self):
        basis = _make_basis()
        rhs, wall, disk = _make_problem(basis, 0, "s", seed=4)
        op = HelmholtzOperator(basis, 0, "s", 30.0, wall_kind="integral")
        wall_trace, _ = op.boundary_traces(op.solve(rhs, wall, disk))
        assert_allclose(wall_trace[:-1], wall[:-1], atol=1e-10)

    def test_missing_data_means_homogeneous(self):
        basis = _make_basis()
        op = HelmholtzOperator(basis, 1, "s", 10.0)
        solution = op.solve(basis.zeros(1, "s"))
        assert_allclose(solution.coeffs, 0.0)

    def test_invalid_configurations(self):
        basis = _make_basis()
        with pytest.raises(DimensionError):
            HelmholtzOperator(basis, 0, "s", 1.0, corner="edge")
        with pytest.raises(DimensionError):
            HelmholtzOperator(basis, 0, "s", 1.0, wall_kind="integral", corner="wall")

    def test_shape_and_mode_mismatch(self):
        basis = _make_basis()
        op = HelmholtzOperator(basis, 1, "s", 10.0)
        with pytest.raises(DimensionError):
            op.solve(basis.zeros(0, "s"))
        with pytest.raises(DimensionError):
            op.solve(basis.zeros(1, "s"), wall=np.zeros(3))

    def test_solve_helmholtz_checks_kinds(self):
        basis = _make_basis()
        rhs, wall, disk = _make_problem(basis, 1, "s", seed=5)
        op = HelmholtzOperator(basis, 1, "s", 10.0)
        bcs = (BoundaryCondition("wall", data=wall), BoundaryCondition("disk", data=disk))
        assert_allclose(solve_helmholtz(op, rhs, bcs).coeffs, op.solve(rhs, wall, disk).coeffs)
        with pytest.raises(DimensionError):
            solve_helmholtz(op, rhs, (BoundaryCondition("wall", "neumann"),))
        with pytest.raises(DimensionError):
            solve_helmholtz(op, rhs, (BoundaryCondition("axis"),))

    @pytest.mark.parametrize("corner", ["disk", "wall"])
    def test_reduced_radial_size(self, corner):
        basis = _make_basis()
        rhs, wall, disk = _make_problem(basis, 1, "a", seed=6)
        op = HelmholtzOperator(basis, 1, "a", 5.0, corner=corner, radial_size=5)
        fast = op.solve(rhs, wall, disk)
        dense = dense_system(op).solve(rhs.coeffs, wall, disk)
        assert_allclose(fast.coeffs, dense, atol=1e-10 * np.abs(dense).max())
        assert_allclose(fast.coeffs[:, 5:], 0.0)
        mask = op.interior_mask()
        assert mask.sum() == (basis.size("a") - 1) * 4
        assert not mask[:, 4:].any()
        assert_allclose(op.apply(fast).coeffs[mask], rhs.coeffs[mask], atol=1e-9)

    @pytest.mark.parametrize("size", [1, 7])
    def test_invalid_radial_size(self, size):
        with pytest.raises(DimensionError):
            HelmholtzOperator(_make_basis(), 1, "s", 1.0, radial_size=size)

    def test_large_mu_returns_scaled_rhs(self):
        basis = _make_basis()
        target, _, _ = _make_problem(basis, 1, "s", seed=7)
        op = HelmholtzOperator(basis, 1, "s", 1e9)
        solution = op.solve(target * 1e9, basis.wall_trace(target), basis.disk_trace(target))
        assert_allclose(solution.coeffs, target.coeffs, atol=1e-4 * np.abs(target.coeffs).max())


# ---------------------------------------------------------------------------
# Horizontal Poisson
# ---------------------------------------------------------------------------
class TestHorizontalPoisson:
    @pytest.mark.parametrize("m,kind", [(0, "axis"), (1, "dirichlet"), (1, "neumann")])
    def test_inverts_horizontal_laplacian(self, m, kind):
        basis = _make_basis()
        rhs, _, _ = _make_problem(basis, m, "s", seed=6)
        solution = HorizontalPoisson(basis, m, kind).solve(rhs)
        back = basis.apply_operator(solution, "lap_h")
        assert_allclose(back.coeffs[:, :-1], rhs.coeffs[:, :-1], atol=1e-9)

    def test_wall_value(self):
        basis = _make_basis()
        rhs, wall, _ = _make_problem(basis, 1, "a", seed=7)
        solution = HorizontalPoisson(basis, 1, "dirichlet").solve(rhs, wall)
        assert_allclose(basis.wall_trace(solution), wall, atol=1e-10)

    def test_neumann_singular_for_axisymmetric_mode(self):
        with pytest.raises(SolvabilityError):
            HorizontalPoisson(_make_basis(), 0, "neumann")

    def test_axis_only_for_axisymmetric_mode(self):
        with pytest.raises(DimensionError):
            HorizontalPoisson(_make_basis(), 1, "axis")

    def test_solve_poisson_h_dispatch(self):
        basis = _make_basis()
        rhs, _, _ = _make_problem(basis, 0, "s", seed=8)
        solution = solve_poisson_h(basis, rhs, BoundaryCondition("axis"))
        expected = HorizontalPoisson(basis, 0, "axis").solve(rhs)
        assert_allclose(solution.coeffs, expected.coeffs)
        with pytest.raises(DimensionError):
            solve_poisson_h(basis, rhs, BoundaryCondition("disk"))
