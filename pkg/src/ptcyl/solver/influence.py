"""
Influence - Influence matrices and their regularisation

An influence matrix maps trial Dirichlet data of the intermediate fields
(data slots such as sigma_g(z), sigma_f(z), sigma_disk(r)) to the residuals
of the true boundary and compatibility conditions. Columns are built from
homogeneous solves, one unit datum at a time.

Regularisation pipeline:
    1. block scaling of block-rows and block-columns
    2. row scaling (each row divided by its 2-norm)
    3. singular value decomposition
    4. zero singular values (relative threshold AND gap) replaced by 1

The scaled SVD factors are stored; scaling is undone when a correction is
applied, so no explicit dense inverse is ever formed.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .errors import ImageSpaceError, InfluenceBuildError, SolverError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundaryUnit:
    """
    One column of an influence matrix.

    Attributes:
        slot: Data slot name (sigma_g, sigma_f, sigma_disk, sigma_phi)
        index: Position inside the slot
        label: Basis function, e.g. "T_4" or "Q_2"
    """

    slot: str
    index: int
    label: str


@dataclass(frozen=True)
class BlockLayout:
    """
    Ordered named blocks of a boundary data or residual vector.

    Attributes:
        names: Block names in order
        sizes: Block lengths
        labels: Basis label per block ("T" with its Chebyshev indices or "Q")
    """

    names: Tuple[str, ...]
    sizes: Tuple[int, ...]
    first_index: Tuple[int, ...] = ()
    steps: Tuple[int, ...] = ()
    kinds: Tuple[str, ...] = ()

    @classmethod
    def from_blocks(cls, blocks: Sequence[Tuple[str, int, str, int, int]]) -> "BlockLayout":
        """Blocks given as (name, size, kind "T"/"Q", first index, index step)."""
        return cls(
            names=tuple(b[0] for b in blocks),
            sizes=tuple(int(b[1]) for b in blocks),
            kinds=tuple(b[2] for b in blocks),
            first_index=tuple(int(b[3]) for b in blocks),
            steps=tuple(int(b[4]) for b in blocks),
        )

    @property
    def total(self) -> int:
        return int(sum(self.sizes))

    @property
    def offsets(self) -> List[int]:
        return [0] + list(np.cumsum(self.sizes))

    def slices(self) -> Dict[str, slice]:
        offsets = self.offsets
        return {name: slice(offsets[i], offsets[i + 1]) for i, name in enumerate(self.names)}

    def split(self, vector: np.ndarray) -> Dict[str, np.ndarray]:
        if vector.shape[0] != self.total:
            raise SolverError(
                f"Vector of length {vector.shape[0]} does not match layout {self.total}"
            )
        return {name: vector[s] for name, s in self.slices().items()}

    def join(self, parts: Dict[str, Optional[np.ndarray]]) -> np.ndarray:
        out = np.zeros(self.total, complex)
        for name, s in self.slices().items():
            value = parts.get(name)
            if value is not None:
                out[s] = value
        return out

    def units(self) -> List[BoundaryUnit]:
        out = []
        for i, name in enumerate(self.names):
            kind = self.kinds[i] if self.kinds else "T"
            first = self.first_index[i] if self.first_index else 0
            step = self.steps[i] if self.steps else 1
            for j in range(self.sizes[i]):
                out.append(BoundaryUnit(name, j, f"{kind}_{first + step * j}"))
        return out


# =============================================================================
# SCALING
# =============================================================================


def block_norms(matrix: np.ndarray, rows: BlockLayout, cols: BlockLayout) -> np.ndarray:
    """Infinity norms c_ij of the block partition."""
    out = np.zeros((len(rows.names), len(cols.names)))
    row_slices = list(rows.slices().values())
    col_slices = list(cols.slices().values())
    for i, rs in enumerate(row_slices):
        for j, cs in enumerate(col_slices):
            block = matrix[rs, cs]
            out[i, j] = np.abs(block).sum(axis=1).max() if block.size else 0.0
    return out


def _guard_zero_norms(c: np.ndarray, needed: Sequence[Tuple[int, int]]) -> np.ndarray:
    c = c.astype(float).copy()
    positive = c[c > 0]
    if positive.size == 0:
        logger.warning("All block norms vanish; block scaling falls back to unit factors")
        return np.ones_like(c)
    smallest = positive.min()
    for i, j in needed:
        if c[i, j] == 0:
            logger.warning(
                "Zero block norm c_%d%d in a scaling formula; using smallest nonzero norm %.3e",
                i + 1,
                j + 1,
                smallest,
            )
            c[i, j] = smallest
    return c


def scaling_factors(c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Closed-form block scaling for a 3x3 partition.

    Block rows are (c_g, c_f, c_disk) and block columns (sigma_g, sigma_f,
    sigma_disk). The factors make the diagonal blocks unit
    (alpha_i beta_i c_ii = 1) and balance the (2,1)/(1,2) and (3,2)/(2,3)
    pairs, with alpha_3 = 1.

    Returns:
        Tuple (alpha, beta)
    """
    c = _guard_zero_norms(
        np.asarray(c), [(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)]
    )
    c11, c12, c21, c22 = c[0, 0], c[0, 1], c[1, 0], c[1, 1]
    c23, c32, c33 = c[1, 2], c[2, 1], c[2, 2]
    alpha = np.array(
        [np.sqrt(c21 * c32 * c33 / (c11 * c12 * c23)), np.sqrt(c32 * c33 / (c22 * c23)), 1.0]
    )
    beta = np.array(
        [
            np.sqrt(c12 * c23 / (c11 * c21 * c32 * c33)),
            np.sqrt(c23 / (c22 * c32 * c33)),
            1.0 / c33,
        ]
    )
    return alpha, beta


def equalize_blocks(c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Block scaling for an n x n partition by least squares in log space.

    Unknowns are log alpha_i and log beta_j. Equations ask for unit diagonal
    blocks and balanced symmetric pairs wherever both norms are nonzero; the
    last alpha is fixed to 1.
    """
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    c = _guard_zero_norms(c, [(i, i) for i in range(n)])
    rows: List[np.ndarray] = []
    rhs: List[float] = []
    for i in range(n):
        eq = np.zeros(2 * n)
        eq[i] = eq[n + i] = 1.0
        rows.append(eq)
        rhs.append(-np.log(c[i, i]))
    for i in range(n):
        for j in range(i + 1, n):
            if c[i, j] > 0 and c[j, i] > 0:
                # alpha_j beta_i c_ji = alpha_i beta_j c_ij
                eq = np.zeros(2 * n)
                eq[j] += 1.0
                eq[n + i] += 1.0
                eq[i] -= 1.0
                eq[n + j] -= 1.0
                rows.append(eq)
                rhs.append(np.log(c[i, j]) - np.log(c[j, i]))
    gauge = np.zeros(2 * n)
    gauge[n - 1] = 1.0
    rows.append(gauge)
    rhs.append(0.0)
    solution = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]
    return np.exp(solution[:n]), np.exp(solution[n:])


def block_scale(
    matrix: np.ndarray, rows: BlockLayout, cols: BlockLayout
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Scale block-rows by alpha and block-columns by beta.

    Returns:
        Tuple (scaled matrix, per-row factors, per-column factors)
    """
    c = block_norms(matrix, rows, cols)
    nblocks = (len(rows.names), len(cols.names))
    if nblocks == (3, 3):
        alpha, beta = scaling_factors(c)
    elif nblocks[0] == nblocks[1] and nblocks[0] > 3:
        alpha, beta = equalize_blocks(c)
    else:
        # axisymmetric blocks: row scaling alone
        alpha, beta = np.ones(nblocks[0]), np.ones(nblocks[1])
    row_factors = np.repeat(alpha, rows.sizes)
    col_factors = np.repeat(beta, cols.sizes)
    return row_factors[:, None] * matrix * col_factors[None, :], row_factors, col_factors


def row_scale(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(matrix, axis=1)
    factors = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    return factors[:, None] * matrix, factors


def _condition(gamma: np.ndarray, zero_count: int) -> float:
    kept = gamma[: gamma.size - zero_count] if zero_count else gamma
    if kept.size == 0 or kept[-1] == 0:
        return float("inf")
    return float(kept[0] / kept[-1])


# =============================================================================
# INFLUENCE MATRIX
# =============================================================================


@dataclass
class RegularizationReport:
    """Singular spectra and condition numbers of the regularisation stages."""

    gamma_raw: np.ndarray
    gamma_scaled: np.ndarray
    zero_count: int
    gap_index: Optional[int]
    gap_ratio: float
    threshold_only: bool
    condition_raw: float
    condition_row: float
    condition_block: float
    condition_scaled: float

    def spectrum_rows(self) -> List[Tuple[int, float, float]]:
        size = max(self.gamma_raw.size, self.gamma_scaled.size)
        raw = np.pad(self.gamma_raw, (0, size - self.gamma_raw.size))
        scaled = np.pad(self.gamma_scaled, (0, size - self.gamma_scaled.size))
        return [(i, float(raw[i]), float(scaled[i])) for i in range(size)]


@dataclass
class InfluenceMatrix:
    """
    Influence matrix of one (m, parity) block with its regularised inverse.

    Attributes:
        m: Azimuthal wavenumber
        parity: Parity of the block
        matrix: Dense residual-by-datum matrix
        rows: Residual layout
        cols: Boundary data layout
        block_norms: Infinity norms of the block partition
        row_factors: Block scaling per row (alpha expanded) times row scaling
        col_factors: Block scaling per column (beta expanded)
        u, gamma, vh: SVD of the scaled matrix
        zero_mask: Singular values treated as exact zeros
        report: Regularisation report
    """

    m: int
    parity: str
    matrix: np.ndarray
    rows: BlockLayout
    cols: BlockLayout
    block_norms: np.ndarray = field(default=None)
    row_factors: np.ndarray = field(default=None)
    col_factors: np.ndarray = field(default=None)
    u: np.ndarray = field(default=None)
    gamma: np.ndarray = field(default=None)
    vh: np.ndarray = field(default=None)
    zero_mask: np.ndarray = field(default=None)
    report: Optional[RegularizationReport] = None
    image_tolerance: float = 1e-6

    @classmethod
    def build(
        cls,
        m: int,
        parity: str,
        solve_chain: Callable[[np.ndarray], np.ndarray],
        rows: BlockLayout,
        cols: BlockLayout,
        threshold_zero: float = 1e-14,
        threshold_gap: float = 1e3,
        condition_target: float = 1e8,
        image_tolerance: float = 1e-6,
    ) -> "InfluenceMatrix":
        """
        Assemble columns from homogeneous solves and regularise.

        Args:
            solve_chain: Maps a boundary data vector to the residual vector with S=0
        """
        matrix = np.zeros((rows.total, cols.total), complex)
        for j, unit in enumerate(cols.units()):
            sigma = np.zeros(cols.total, complex)
            sigma[j] = 1.0
            try:
                column = solve_chain(sigma)
            except SolverError as exc:
                raise InfluenceBuildError(
                    f"Homogeneous solve failed for m={m}, p={parity}, unit "
                    f"{unit.slot}[{unit.label}]: {exc}"
                ) from exc
            if column.shape != (rows.total,):
                raise InfluenceBuildError(
                    f"Residual length {column.shape} != {rows.total} for unit {unit.slot}"
                )
            matrix[:, j] = column
        influence = cls(m, parity, matrix, rows, cols, image_tolerance=image_tolerance)
        influence.regularize(threshold_zero, threshold_gap, condition_target)
        return influence

    def regularize(
        self,
        threshold_zero: float = 1e-14,
        threshold_gap: float = 1e3,
        condition_target: float = 1e8,
    ) -> RegularizationReport:
        """Block scaling, row scaling, SVD and replacement of zero singular values."""
        self.block_norms = block_norms(self.matrix, self.rows, self.cols)
        blocked, alpha_rows, beta_cols = block_scale(self.matrix, self.rows, self.cols)
        scaled, rho = row_scale(blocked)
        u, gamma, vh = linalg.svd(scaled, full_matrices=False)

        gmax = gamma[0] if gamma.size and gamma[0] > 0 else 1.0
        candidates = np.nonzero(gamma / gmax < threshold_zero)[0]
        zero_mask = np.zeros(gamma.size, dtype=bool)
        gap_index: Optional[int] = None
        gap_ratio = float("inf")
        threshold_only = False
        if candidates.size:
            first = int(candidates[0])
            zero_mask[first:] = True
            gap_index = first
            if first > 0:
                gap_ratio = float(gamma[first - 1] / max(gamma[first], np.finfo(float).tiny))
            if gap_ratio < threshold_gap:
                threshold_only = True
                logger.warning(
                    "No singular-value gap for m=%s p=%s (ratio %.3e < %.1e); "
                    "using the relative threshold alone",
                    self.m,
                    self.parity,
                    gap_ratio,
                    threshold_gap,
                )
        zero_count = int(zero_mask.sum())

        gamma_raw = linalg.svdvals(self.matrix)
        report = RegularizationReport(
            gamma_raw=gamma_raw,
            gamma_scaled=gamma,
            zero_count=zero_count,
            gap_index=gap_index,
            gap_ratio=gap_ratio,
            threshold_only=threshold_only,
            condition_raw=_condition(gamma_raw, zero_count),
            condition_row=_condition(linalg.svdvals(row_scale(self.matrix)[0]), zero_count),
            condition_block=_condition(linalg.svdvals(blocked), zero_count),
            condition_scaled=_condition(gamma, zero_count),
        )
        if report.condition_scaled > condition_target:
            logger.warning(
                "Scaled condition number %.3e exceeds target %.1e for m=%s p=%s",
                report.condition_scaled,
                condition_target,
                self.m,
                self.parity,
            )
        logger.debug(
            "Influence m=%s p=%s: size %s, zeros %d, cond raw %.3e scaled %.3e",
            self.m,
            self.parity,
            self.matrix.shape,
            zero_count,
            report.condition_raw,
            report.condition_scaled,
        )

        self.row_factors = rho * alpha_rows
        self.col_factors = beta_cols
        self.u, self.gamma, self.vh = u, gamma, vh
        self.zero_mask = zero_mask
        self.report = report
        return report

    @property
    def zero_indices(self) -> np.ndarray:
        return np.nonzero(self.zero_mask)[0]

    def apply_correction(self, residuals: np.ndarray) -> np.ndarray:
        """
        Regularised solve of C sigma = residuals.

        Raises:
            ImageSpaceError: if the scaled residual has a large component
                along the left singular vectors of the zero singular values
        """
        residuals = np.asarray(residuals, dtype=complex)
        if residuals.shape != (self.rows.total,):
            raise SolverError(
                f"Residual length {residuals.shape} does not match matrix rows {self.rows.total}"
            )
        scaled = self.row_factors * residuals
        projected = self.u.conj().T @ scaled
        total = np.linalg.norm(scaled)
        if self.zero_mask.any() and total > 0:
            outside = np.linalg.norm(projected[self.zero_mask]) / total
            if outside > self.image_tolerance:
                raise ImageSpaceError(
                    f"Residual for m={self.m}, p={self.parity} is not in the image of the "
                    f"influence matrix (relative nullspace component {outside:.3e})"
                )
        # rank-deficient rows beyond the SVD rank are outside the image as well
        leftover = scaled - self.u @ projected
        if total > 0 and np.linalg.norm(leftover) / total > self.image_tolerance:
            raise ImageSpaceError(
                f"Residual for m={self.m}, p={self.parity} has a component "
                f"{np.linalg.norm(leftover) / total:.3e} outside the column space"
            )
        gamma = np.where(self.zero_mask, 1.0, self.gamma)
        coeffs = np.where(self.zero_mask, 0.0, projected / gamma)
        return self.col_factors * (self.vh.conj().T @ coeffs)

    # -------------------------------------------------------------------------
    # persistence
    # -------------------------------------------------------------------------

    def to_arrays(self) -> Dict[str, np.ndarray]:
        out = {
            "m": np.array(self.m),
            "parity": np.array(self.parity),
            "matrix": self.matrix,
            "block_norms": self.block_norms,
            "row_factors": self.row_factors,
            "col_factors": self.col_factors,
            "u": self.u,
            "gamma": self.gamma,
            "vh": self.vh,
            "zero_mask": self.zero_mask,
            "gamma_raw": self.report.gamma_raw,
            "conditions": np.array(
                [
                    self.report.condition_raw,
                    self.report.condition_row,
                    self.report.condition_block,
                    self.report.condition_scaled,
                    self.report.gap_ratio,
                    -1 if self.report.gap_index is None else self.report.gap_index,
                    float(self.report.threshold_only),
                    self.image_tolerance,
                ]
            ),
        }
        for prefix, layout in (("rows", self.rows), ("cols", self.cols)):
            out[f"{prefix}_names"] = np.array(layout.names)
            out[f"{prefix}_sizes"] = np.array(layout.sizes)
            out[f"{prefix}_kinds"] = np.array(layout.kinds)
            out[f"{prefix}_first"] = np.array(layout.first_index)
            out[f"{prefix}_steps"] = np.array(layout.steps)
        return out

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray]) -> "InfluenceMatrix":
        layouts = {}
        for prefix in ("rows", "cols"):
            layouts[prefix] = BlockLayout(
                names=tuple(str(n) for n in arrays[f"{prefix}_names"]),
                sizes=tuple(int(s) for s in arrays[f"{prefix}_sizes"]),
                kinds=tuple(str(k) for k in arrays[f"{prefix}_kinds"]),
                first_index=tuple(int(f) for f in arrays[f"{prefix}_first"]),
                steps=tuple(int(s) for s in arrays[f"{prefix}_steps"]),
            )
        cond = arrays["conditions"]
        zero_mask = arrays["zero_mask"].astype(bool)
        report = RegularizationReport(
            gamma_raw=arrays["gamma_raw"],
            gamma_scaled=arrays["gamma"],
            zero_count=int(zero_mask.sum()),
            gap_index=None if cond[5] < 0 else int(cond[5]),
            gap_ratio=float(cond[4]),
            threshold_only=bool(cond[6]),
            condition_raw=float(cond[0]),
            condition_row=float(cond[1]),
            condition_block=float(cond[2]),
            condition_scaled=float(cond[3]),
        )
        return cls(
            m=int(arrays["m"]),
            parity=str(arrays["parity"]),
            matrix=arrays["matrix"],
            rows=layouts["rows"],
            cols=layouts["cols"],
            block_norms=arrays["block_norms"],
            row_factors=arrays["row_factors"],
            col_factors=arrays["col_factors"],
            u=arrays["u"],
            gamma=arrays["gamma"],
            vh=arrays["vh"],
            zero_mask=zero_mask,
            report=report,
            image_tolerance=float(cond[7]),
        )


def build_influence_matrix(
    m: int,
    parity: str,
    solve_chain: Callable[[np.ndarray], np.ndarray],
    rows: BlockLayout,
    cols: BlockLayout,
    **thresholds,
) -> InfluenceMatrix:
    """Module-level alias of InfluenceMatrix.build."""
    return InfluenceMatrix.build(m, parity, solve_chain, rows, cols, **thresholds)


def regularize(matrix: InfluenceMatrix, **thresholds) -> RegularizationReport:
    return matrix.regularize(**thresholds)


def apply_correction(matrix: InfluenceMatrix, residuals: np.ndarray) -> np.ndarray:
    return matrix.apply_correction(residuals)
