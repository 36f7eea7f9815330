"""
DiagnosticsLog Hook - Per-step diagnostics CSV

Writes step, t, energy, divergence, maxBCresidual (and magnetic_energy for
MHD runs) after every step. maxBCresidual is measured on the synthesized
boundary traces: no-slip of the velocity, and for MHD runs the jump between
the interior field and its vacuum continuation.
"""

import logging
from pathlib import Path
from typing import TYPE_CHECKING, Dict, Optional

from ..hydro import diagnostics, lid_speeds
from ..magnetic import matching_residual
from ..storage import write_csv
from .base import HookBase

if TYPE_CHECKING:
    from ..context import RunContext

logger = logging.getLogger(__name__)

COLUMNS = ("step", "t", "energy", "divergence", "maxBCresidual")


class DiagnosticsLog(HookBase):
    """
    Records diagnostics rows in the context and writes them as CSV.

    Example:
        integrator = Integrator(config, hooks=[DiagnosticsLog("diagnostics.csv")])
    """

    name = "diagnostics"

    def __init__(self, filename: str = "diagnostics.csv"):
        self.filename = filename
        self.path: Optional[Path] = None

    def _row(self, context: "RunContext") -> Dict[str, float]:
        config = context.config
        top, bottom = lid_speeds(
            config.omega_top, config.omega_bottom, config.spinup_steps, context.step
        )
        values = diagnostics(
            context.basis, context.velocity, config.Re, top, bottom, config.disk_smoothing
        )
        row: Dict[str, float] = {
            "step": context.step,
            "t": float(context.t),
            "energy": values["energy"],
            "divergence": values["divergence"],
            "maxBCresidual": values["max_bc_residual"],
            "influence_residual": values["influence_residual"],
            "torque_top": values["torque_top"],
            "torque_bottom": values["torque_bottom"],
            "increment": context.increment,
        }
        if context.magnetic is not None:
            row["magnetic_energy"] = context.magnetic.energy(context.basis)
            if context.dtn is not None:
                matching = matching_residual(context.basis, context.magnetic, context.dtn)
                row["maxBCresidual"] = max(row["maxBCresidual"], matching)
        return row

    def before_run(self, context: "RunContext") -> None:
        self.path = context.output_dir / self.filename
        context.history.append(self._row(context))

    def after_step(self, context: "RunContext") -> None:
        row = self._row(context)
        context.history.append(row)
        logger.debug(
            "step %d t=%.4f E=%.6e div=%.2e res=%.2e",
            row["step"],
            row["t"],
            row["energy"],
            row["divergence"],
            row["maxBCresidual"],
        )

    def after_run(self, context: "RunContext") -> None:
        header = list(COLUMNS)
        if context.magnetic is not None:
            header.append("magnetic_energy")
        rows = [[row[name] for name in header] for row in context.history]
        write_csv(self.path, header, rows)
        context.written.append(self.path)
        context.add_to_result("diagnostics", str(self.path))
