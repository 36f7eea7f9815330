"""
HookBase - Base class for all run hooks

Defines the interface that all hooks must follow.
"""

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..context import RunContext


class HookBase:
    """
    Base class for hooks.

    Hooks observe an Integrator run at fixed points without changing the
    numerics.

    Available hooks (in order of execution):
    1. before_run - After influence matrices are ready, before step 1
    2. after_step - After every completed step
    3. after_run - After the last step

    Example:
        class PrintEnergy(HookBase):
            def after_step(self, context):
                logger.info("E = %.6e", context.velocity.energy(context.basis))
    """

    name: str = "base"

    def before_run(self, context: "RunContext") -> None:
        """
        Hook executed once BEFORE the first step.

        Use this hook to:
        - Open output files
        - Record the initial state

        Args:
            context: Run context
        """

    def after_step(self, context: "RunContext") -> None:
        """
        Hook executed AFTER every completed step.

        Args:
            context: Run context holding the new state
        """

    def after_run(self, context: "RunContext") -> None:
        """
        Hook executed once AFTER the last step.

        Args:
            context: Run context holding the final state
        """

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__} name='{self.name}'>"
