"""Exception types shared across the scheduling pipeline."""


class ModelError(ValueError):
    """Workpart, COA or robot model is inconsistent."""


class PartitionError(ValueError):
    """A partition violates a hard geometric bound."""


class ConstraintError(ValueError):
    """An offset schedule violates the spacing or ordering constraints."""

    def __init__(self, message: str, robots: tuple[int, ...] = ()):
        super().__init__(message)
        self.robots = robots


class LeftoverError(RuntimeError):
    """No conflict-free initial leftover schedule could be built."""


class IncompleteRunError(RuntimeError):
    """Efficiency requested for a run that left tasks unexecuted."""
