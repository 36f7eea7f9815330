"""
SnapshotWriter Hook - Spectral snapshots every few steps
"""

import logging
from typing import TYPE_CHECKING

from ..storage import write_snapshot
from .base import HookBase

if TYPE_CHECKING:
    from ..context import RunContext

logger = logging.getLogger(__name__)


class SnapshotWriter(HookBase):
    """
    Writes `snapshot_<step>.bin` every `every` steps and after the last step.

    A period of 0 writes the final state only.
    """

    name = "snapshots"

    def __init__(self, every: int = 0, prefix: str = "snapshot"):
        self.every = every
        self.prefix = prefix

    def _write(self, context: "RunContext") -> None:
        path = context.output_dir / f"{self.prefix}_{context.step:06d}.bin"
        write_snapshot(path, context.basis.spec, context.velocity, context.magnetic)
        context.written.append(path)

    def after_step(self, context: "RunContext") -> None:
        if self.every and context.step % self.every == 0:
            self._write(context)

    def after_run(self, context: "RunContext") -> None:
        last = context.output_dir / f"{self.prefix}_{context.step:06d}.bin"
        if last not in context.written:
            self._write(context)
        logger.info("Snapshots written to %s", context.output_dir)
