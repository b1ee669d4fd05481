"""Exception types shared across the package."""


class NumericFailure(RuntimeError):
    """A numerical routine failed to converge within its iteration cap."""


class DegenerateSensorError(ValueError):
    """A sensor's representer is linearly dependent on earlier ones."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"sensor {index} yields a rank-deficient representer set")


class UnstableSpaceError(ValueError):
    """The reduced space meets the measurement complement nontrivially (s_n ~ 0)."""


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage tag for CLI exit reporting."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")
