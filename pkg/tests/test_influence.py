import numpy as np
import pytest
from numpy.testing import assert_allclose

from ptcyl.solver.errors import ImageSpaceError, InfluenceBuildError, SolverError
from ptcyl.solver.hydro import HydroTableau
from ptcyl.solver.influence import (
    BlockLayout,
    InfluenceMatrix,
    block_norms,
    block_scale,
    build_influence_matrix,
    equalize_blocks,
    row_scale,
    scaling_factors,
)
from ptcyl.solver.spectral import BasisSpec, SpectralBasis


def _make_layout(sizes=(2, 2, 2), names=("g", "f", "disk")):
    return BlockLayout.from_blocks(
        [(name, size, "T", 0, 1) for name, size in zip(names, sizes)]
    )


def _make_matrix(size=6, seed=0, zero_column=None):
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((size, size)) + np.eye(size) * size
    # uneven block magnitudes
    matrix[:2] *= 1e3
    matrix[:, 4:] *= 1e-2
    if zero_column is not None:
        matrix[:, zero_column] = 0.0
    return matrix


def _make_influence(matrix, **kwargs):
    layout = _make_layout()
    return build_influence_matrix(0, "s", lambda sigma: matrix @ sigma, layout, layout, **kwargs)


# ---------------------------------------------------------------------------
# BlockLayout
# ---------------------------------------------------------------------------
class TestBlockLayout:
    def test_offsets_and_units(self):
        layout = BlockLayout.from_blocks(
            [("sigma_g", 3, "T", 0, 2), ("sigma_f", 2, "T", 1, 2), ("sigma_disk", 2, "Q", 0, 1)]
        )
        assert layout.total == 7
        assert layout.offsets == [0, 3, 5, 7]
        labels = [unit.label for unit in layout.units()]
        assert labels == ["T_0", "T_2", "T_4", "T_1", "T_3", "Q_0", "Q_1"]
        assert layout.units()[3].slot == "sigma_f"

    def test_split_and_join(self):
        layout = _make_layout(sizes=(1, 2, 3))
        vector = np.arange(6.0)
        parts = layout.split(vector)
        assert_allclose(parts["f"], [1.0, 2.0])
        assert_allclose(layout.join(parts), vector)
        assert_allclose(layout.join({"disk": np.ones(3)}), [0, 0, 0, 1, 1, 1])

    def test_split_wrong_length(self):
        with pytest.raises(SolverError):
            _make_layout().split(np.zeros(5))


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------
class TestScaling:
    def test_closed_form_factors(self):
        rng = np.random.default_rng(1)
        c = 10.0 ** rng.uniform(-3, 3, (3, 3))
        alpha, beta = scaling_factors(c)
        scaled = alpha[:, None] * c * beta[None, :]
        assert_allclose(np.diag(scaled), 1.0)
        assert scaled[1, 0] == pytest.approx(scaled[0, 1])
        assert scaled[2, 1] == pytest.approx(scaled[1, 2])
        assert alpha[2] == 1.0

    def test_zero_norm_is_guarded(self):
        c = np.ones((3, 3))
        c[1, 2] = 0.0
        alpha, beta = scaling_factors(c)
        assert np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))

    def test_equalize_symmetric_partition(self):
        rng = np.random.default_rng(2)
        c = 10.0 ** rng.uniform(-2, 2, (4, 4))
        c = np.sqrt(c * c.T)
        alpha, beta = equalize_blocks(c)
        scaled = alpha[:, None] * c * beta[None, :]
        assert_allclose(np.diag(scaled), 1.0, rtol=1e-10)
        assert_allclose(scaled, scaled.T, rtol=1e-10)
        assert alpha[-1] == pytest.approx(1.0)

    def test_block_scale_units_diagonal_blocks(self):
        layout = _make_layout()
        matrix = _make_matrix()
        scaled, rows, cols = block_scale(matrix, layout, layout)
        assert rows.shape == cols.shape == (6,)
        assert_allclose(np.diag(block_norms(scaled, layout, layout)), 1.0)

    def test_two_blocks_are_left_alone(self):
        layout = _make_layout(sizes=(3, 3), names=("g", "disk"))
        matrix = _make_matrix()
        scaled, rows, cols = block_scale(matrix, layout, layout)
        assert_allclose(scaled, matrix)
        assert_allclose(rows, 1.0)

    def test_row_scale(self):
        matrix = np.array([[3.0, 4.0], [0.0, 0.0], [0.0, 2.0]])
        scaled, factors = row_scale(matrix)
        assert_allclose(np.linalg.norm(scaled, axis=1), [1.0, 0.0, 1.0])
        assert_allclose(factors, [0.2, 1.0, 0.5])

    def test_scaled_block_pattern(self):
        layout = _make_layout()
        c = np.array([[1e7, 1.0, 1.0], [1e-2, 1e-5, 1e-5], [0.0, 1e-5, 1e-4]])
        unit = np.array([[0.6, 0.4], [0.3, 0.7]])
        matrix = np.kron(c, unit)
        assert_allclose(block_norms(matrix, layout, layout), c)
        scaled, _, _ = block_scale(matrix, layout, layout)
        pattern = np.array([[1.0, 1e-2, 1e-2], [1e-2, 1.0, 1.0], [0.0, 1.0, 1.0]])
        norms = block_norms(scaled, layout, layout)
        assert norms[2, 0] == 0.0
        ratio = norms[pattern > 0] / pattern[pattern > 0]
        assert np.all((ratio >= 0.1) & (ratio <= 10.0))


# ---------------------------------------------------------------------------
# InfluenceMatrix
# ---------------------------------------------------------------------------
class TestInfluenceMatrix:
    def test_full_rank_correction_inverts(self):
        matrix = _make_matrix()
        influence = _make_influence(matrix)
        assert influence.report.zero_count == 0
        assert influence.report.condition_scaled <= influence.report.condition_raw
        x = np.arange(1.0, 7.0)
        assert_allclose(influence.apply_correction(matrix @ x), x, rtol=1e-8)

    def test_zero_singular_value_detected(self):
        matrix = _make_matrix(seed=3, zero_column=5)
        influence = _make_influence(matrix)
        report = influence.report
        assert report.zero_count == 1
        assert list(influence.zero_indices) == [5]
        assert not report.threshold_only
        assert np.isfinite(report.condition_scaled)

    def test_correction_in_image(self):
        matrix = _make_matrix(seed=4, zero_column=5)
        influence = _make_influence(matrix)
        x = np.arange(1.0, 7.0)
        sigma = influence.apply_correction(matrix @ x)
        assert_allclose(matrix @ sigma, matrix @ x, rtol=1e-8, atol=1e-8)

    def test_residual_outside_image(self):
        matrix = _make_matrix(seed=5, zero_column=5)
        influence = _make_influence(matrix)
        with pytest.raises(ImageSpaceError):
            influence.apply_correction(np.random.default_rng(0).standard_normal(6))

    def test_residual_length_checked(self):
        influence = _make_influence(_make_matrix())
        with pytest.raises(SolverError):
            influence.apply_correction(np.zeros(4))

    def test_failed_unit_solve(self):
        layout = _make_layout()

        def broken(sigma):
            raise SolverError("singular")

        with pytest.raises(InfluenceBuildError):
            InfluenceMatrix.build(1, "a", broken, layout, layout)
        with pytest.raises(InfluenceBuildError):
            InfluenceMatrix.build(1, "a", lambda sigma: np.zeros(3), layout, layout)

    def test_arrays_roundtrip_keeps_correction(self):
        matrix = _make_matrix(seed=6, zero_column=2)
        influence = _make_influence(matrix, image_tolerance=1e-5)
        restored = InfluenceMatrix.from_arrays(influence.to_arrays())
        assert restored.rows == influence.rows
        assert restored.report.zero_count == influence.report.zero_count
        assert restored.image_tolerance == pytest.approx(1e-5)
        residual = matrix @ np.ones(6)
        assert_allclose(restored.apply_correction(residual), influence.apply_correction(residual))

    def test_spectrum_rows(self):
        influence = _make_influence(_make_matrix())
        rows = influence.report.spectrum_rows()
        assert len(rows) == 6
        assert rows[0][1] >= rows[-1][1]


# ---------------------------------------------------------------------------
# Velocity influence matrices
# ---------------------------------------------------------------------------
class TestVelocityInfluence:
    @pytest.mark.parametrize("m,parity", [(0, "s"), (1, "a"), (2, "s")])
    def test_zero_count_does_not_depend_on_resolution(self, m, parity):
        counts = []
        for K, N in ((8, 6), (10, 8), (12, 10)):
            basis = SpectralBasis(BasisSpec(M=2, K=K, N=N, h=2.0))
            tableau = HydroTableau(basis, m, parity, 10.0, 0.01)
            counts.append(tableau.build_influence().report.zero_count)
        assert counts[0] >= 1
        assert counts == [counts[0]] * 3
