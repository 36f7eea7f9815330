"""
Integrator - Main class for a time integration

This is the main class that orchestrates a run, integrating the spectral
basis, the cached influence matrices, the velocity and magnetic steppers
and the hooks.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .config import SolverConfig, canonical_payload
from .context import RunContext
from .dtn import DtnMap, build_dtn
from .hooks.base import HookBase
from .hydro import (
    BlockKey,
    HydroStepper,
    MagneticState,
    VelocityState,
    compute_advection,
    hydro_sources,
    increment_norm,
    seed_velocity,
    zero_state,
)
from .influence import InfluenceMatrix
from .magnetic import MagneticStepper, induction_sources, seed_magnetic
from .spectral import PhysicalGrid, SpectralBasis
from .storage import ArtifactCache

logger = logging.getLogger(__name__)

THRESHOLD_KEYS = ("threshold_zero", "threshold_gap", "condition_target", "image_tolerance")
HYDRO_KEYS = ("K", "N", "h", "Re", "dt") + THRESHOLD_KEYS
DTN_KEYS = ("M", "K", "N", "h", "dtn_wall_points", "dtn_disk_points", "dtn_source_depth")
MAGNETIC_KEYS = DTN_KEYS + ("Rm", "dt") + THRESHOLD_KEYS


@dataclass(frozen=True)
class PrecomputeRecord:
    """One precomputed artefact and how it was obtained."""

    kind: str
    m: int
    parity: str
    size: int
    zero_count: int
    condition_raw: float
    condition_scaled: float
    cached: bool


class Integrator:
    """
    Time integration of the rotating-disk problem.

    Orchestrates the complete run:
    1. Builds (or loads) influence matrices and DtN maps
    2. Advances velocity and magnetic field step by step
    3. Calls the hooks after every step

    Example:
        from ptcyl.solver import Integrator, load_config
        from ptcyl.solver.hooks import DiagnosticsLog

        integrator = Integrator(load_config("run.cfg"), hooks=[DiagnosticsLog()])
        context = integrator.run()
    """

    def __init__(
        self,
        config: SolverConfig,
        hooks: Optional[List[HookBase]] = None,
        cache: Optional[ArtifactCache] = None,
    ):
        """
        Initializes the Integrator.

        Args:
            config: Resolved configuration
            hooks: Hooks called during run()
            cache: Artefact cache (config.cache_dir when None)
        """
        self.config = config
        self.hooks = hooks or []
        self.cache = cache or ArtifactCache(config.cache_dir)
        self.basis = SpectralBasis(config.basis_spec)
        self.grid = PhysicalGrid(self.basis)
        self.records: List[PrecomputeRecord] = []
        self._hydro: Optional[HydroStepper] = None
        self._magnetic: Optional[MagneticStepper] = None
        self._dtn: Optional[Dict[BlockKey, DtnMap]] = None

    # -------------------------------------------------------------------------
    # precompute
    # -------------------------------------------------------------------------

    def _payload(self, kind: str, keys: Tuple[str, ...], key: BlockKey) -> Dict:
        payload = canonical_payload(self.config, keys)
        payload.update({"kind": kind, "m": key[0], "parity": key[1]})
        return payload

    def _influences(
        self, kind: str, keys: Tuple[str, ...], tableaux: Dict, thresholds: Dict[str, float]
    ) -> Dict[BlockKey, InfluenceMatrix]:
        def load(key: BlockKey) -> Tuple[InfluenceMatrix, bool]:
            def build() -> Dict:
                return tableaux[key].build_influence(**thresholds).to_arrays()

            arrays, hit = self.cache.get_or_build(self._payload(kind, keys, key), build)
            return InfluenceMatrix.from_arrays(arrays), hit

        ordered = list(tableaux)
        with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
            results = list(pool.map(load, ordered))
        out = {}
        for key, (matrix, hit) in zip(ordered, results):
            report = matrix.report
            self.records.append(
                PrecomputeRecord(
                    kind=kind,
                    m=key[0],
                    parity=key[1],
                    size=matrix.matrix.shape[0],
                    zero_count=report.zero_count,
                    condition_raw=report.condition_raw,
                    condition_scaled=report.condition_scaled,
                    cached=hit,
                )
            )
            out[key] = matrix
        return out

    def hydro_stepper(self) -> HydroStepper:
        if self._hydro is None:
            config = self.config
            stepper = HydroStepper(
                self.basis,
                config.Re,
                config.dt,
                config.omega_top,
                config.omega_bottom,
                config.spinup_steps,
                config.residual_tolerance,
                config.threads,
                config.thresholds,
                influences={},
                disk_smoothing=config.disk_smoothing,
            )
            stepper.influences = self._influences(
                "influence-hydro", HYDRO_KEYS, stepper.tableaux, config.thresholds
            )
            self._hydro = stepper
        return self._hydro

    def dtn_maps(self) -> Dict[BlockKey, DtnMap]:
        if self._dtn is None:
            config = self.config
            maps: Dict[BlockKey, DtnMap] = {}
            built: Optional[Dict[BlockKey, DtnMap]] = None
            for m, parity in config.modes():
                payload = self._payload("dtn", DTN_KEYS, (m, parity))
                arrays = self.cache.load(payload)
                hit = arrays is not None
                if arrays is None:
                    if built is None:
                        built = build_dtn(
                            self.basis,
                            config.dtn_wall_points,
                            config.dtn_disk_points,
                            config.dtn_source_depth,
                        )
                    dtn = built[(m, parity)]
                    self.cache.store(payload, {"matrix": dtn.matrix})
                else:
                    matrix = arrays["matrix"]
                    dtn = DtnMap(m, parity, self.basis.size(parity), matrix)
                maps[(m, parity)] = dtn
                self.records.append(
                    PrecomputeRecord("dtn", m, parity, dtn.matrix.shape[0], 0, 0.0, 0.0, hit)
                )
            self._dtn = maps
        return self._dtn

    def magnetic_stepper(self) -> MagneticStepper:
        if self._magnetic is None:
            config = self.config
            stepper = MagneticStepper(
                self.basis,
                config.Rm,
                config.dt,
                self.dtn_maps(),
                config.residual_tolerance,
                config.threads,
                config.thresholds,
                influences={},
            )
            stepper.influences = self._influences(
                "influence-magnetic", MAGNETIC_KEYS, stepper.tableaux, config.thresholds
            )
            self._magnetic = stepper
        return self._magnetic

    def precompute(self, magnetic: Optional[bool] = None) -> List[PrecomputeRecord]:
        """Build or load every influence matrix (and DtN map for MHD)."""
        self.records = []
        self._hydro = self._magnetic = None
        self._dtn = None
        self.hydro_stepper()
        if self.config.mhd if magnetic is None else magnetic:
            self.magnetic_stepper()
        built = sum(not r.cached for r in self.records)
        logger.info(
            "Precompute: %d artefacts (%d built, %d cached)",
            len(self.records),
            built,
            len(self.records) - built,
        )
        return self.records

    # -------------------------------------------------------------------------
    # run
    # -------------------------------------------------------------------------

    def initial_velocity(self) -> VelocityState:
        config = self.config
        if config.init_amplitude > 0:
            return seed_velocity(self.hydro_stepper(), config.init_amplitude, config.seed)
        return zero_state(self.basis, VelocityState)

    def initial_magnetic(self) -> MagneticState:
        # a dynamo run needs a seed field even when the flow starts at rest
        amplitude = self.config.init_amplitude or 1e-3
        return seed_magnetic(self.magnetic_stepper(), amplitude, self.config.seed + 1)

    def step(
        self, velocity: VelocityState, magnetic: Optional[MagneticState]
    ) -> Tuple[VelocityState, Optional[MagneticState]]:
        """
        One explicit-source, implicit-diffusion step of both fields.

        Nothing is returned for a failed step; the caller keeps the old states.
        """
        u_vectors = velocity.vectors(self.basis)
        b_vectors = magnetic.vectors(self.basis) if magnetic is not None else None
        s_u = compute_advection(self.basis, self.grid, u_vectors, b_vectors)
        sources = hydro_sources(self.basis, s_u, self.config.Re, wall_term=magnetic is not None)
        new_velocity = self.hydro_stepper().timestep(velocity, sources)
        new_magnetic = None
        if magnetic is not None:
            induction = induction_sources(self.basis, self.grid, velocity, magnetic)
            new_magnetic = self.magnetic_stepper().timestep(magnetic, induction)
        return new_velocity, new_magnetic

    def run(
        self,
        velocity: Optional[VelocityState] = None,
        magnetic: Optional[MagneticState] = None,
    ) -> RunContext:
        """
        Performs a full run.

        Args:
            velocity: Initial velocity (zero or seeded when None)
            magnetic: Initial magnetic field (MHD runs only)

        Returns:
            Run context with the final state and the hook outputs
        """
        # 1. Build or load the precomputed operators
        self.precompute()

        # 2. Create run context
        if velocity is None:
            velocity = self.initial_velocity()
        if self.config.mhd and magnetic is None:
            magnetic = self.initial_magnetic()
        context = RunContext(
            config=self.config,
            basis=self.basis,
            velocity=velocity,
            magnetic=magnetic,
            dtn=self.dtn_maps() if magnetic is not None else None,
        )
        context.cache_hits = sum(r.cached for r in self.records)

        # 3. Hooks: before_run
        for hook in self.hooks:
            hook.before_run(context)

        # 4. Time loop
        logger.info(
            "Running %d steps (dt=%.3e, mhd=%s)", self.config.steps, self.config.dt, self.config.mhd
        )
        for _ in range(self.config.steps):
            previous = context.velocity
            context.velocity, context.magnetic = self.step(context.velocity, context.magnetic)
            context.increment = increment_norm(previous, context.velocity)
            for hook in self.hooks:
                hook.after_step(context)

        # 5. Hooks: after_run
        for hook in self.hooks:
            hook.after_run(context)

        return context
