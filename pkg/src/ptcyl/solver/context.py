"""
RunContext - Shared context during a run

This object is passed between the integrator and its hooks, allowing each
hook to read the current state and record what it needs.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from .config import SolverConfig
from .dtn import DtnMap
from .hydro import BlockKey, MagneticState, VelocityState
from .spectral import SpectralBasis


@dataclass
class RunContext:
    """
    Run context that flows through the hook pipeline.

    Attributes:
        config: Resolved configuration
        basis: Spectral basis of the run
        velocity: Current velocity state
        magnetic: Current magnetic state (MHD runs only)
        dtn: Vacuum DtN maps (MHD runs only)

        # Fields hooks can populate
        history: Per-step diagnostics rows
        written: Files written during the run
        cache_hits: Precomputed artefacts loaded from the cache
        increment: Relative velocity change of the last step
        extra_data: Free-form data for the run summary
    """

    # Input parameters
    config: SolverConfig
    basis: SpectralBasis
    velocity: VelocityState
    magnetic: Optional[MagneticState] = None
    dtn: Optional[Dict[BlockKey, DtnMap]] = None

    # Fields populated by hooks
    history: List[Dict[str, float]] = field(default_factory=list)
    written: List[Path] = field(default_factory=list)
    cache_hits: int = 0
    increment: float = 0.0

    # Extra data for the run summary
    extra_data: Dict[str, Any] = field(default_factory=dict)

    @property
    def step(self) -> int:
        return self.velocity.step

    @property
    def t(self) -> float:
        return self.velocity.t

    @property
    def output_dir(self) -> Path:
        return Path(self.config.output_dir)

    def add_to_result(self, key: str, value: Any) -> None:
        """Add extra data that will be included in the run summary"""
        self.extra_data[key] = value
