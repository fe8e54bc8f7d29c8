class NoConflict(Exception):
    """The ego never reaches the obstacle under the assumed motion."""


class InfeasibleError(Exception):
    """No lateral plan satisfies the bounds.

    ``step`` is the planner step index whose bounds could not be reached,
    or ``None`` when the failure is not tied to one step.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class IterationLimitError(RuntimeError):
    """The QP solver stopped before reaching optimality."""
