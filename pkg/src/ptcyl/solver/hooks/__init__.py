"""
Hooks for the Integrator

Hooks are optional observers of a run. Each run can choose which hooks to
use.

Usage:
    from ptcyl.solver.hooks import DiagnosticsLog, SnapshotWriter

    integrator = Integrator(
        config,
        hooks=[
            DiagnosticsLog(),
            SnapshotWriter(every=50),
        ]
    )
"""

from .base import HookBase
from .diagnostics import DiagnosticsLog
from .snapshots import SnapshotWriter

__all__ = [
    "HookBase",
    "DiagnosticsLog",
    "SnapshotWriter",
]
