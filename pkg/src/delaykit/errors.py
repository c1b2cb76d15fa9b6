"""Exception hierarchy shared by the solver, analysis and CLI layers."""


class DelayKitError(Exception):
    """Base class for every error raised by the package."""


class SolverError(DelayKitError):
    """Integration could not continue."""


class AdvanceDetected(SolverError):
    """A delayed argument moved past the current time."""

    def __init__(self, t: float, delay: int, tau: float):
        self.t, self.delay, self.tau = float(t), int(delay), float(tau)
        super().__init__(f"advanced argument at t={self.t!r}: delay {self.delay} has tau={self.tau!r} < 0")


class BlowUp(SolverError):
    """A stage derivative was not finite."""

    def __init__(self, t: float, stage: int):
        self.t, self.stage = float(t), int(stage)
        super().__init__(f"non-finite stage value at t={self.t!r}, stage {self.stage}")


class StepUnderflow(SolverError):
    def __init__(self, t: float, h: float):
        self.t, self.h = float(t), float(h)
        super().__init__(f"step size {self.h!r} too small at t={self.t!r}")


class DegenerateCrossing(SolverError):
    """The delayed argument does not cross a breaking point transversally."""


class OutOfRange(DelayKitError):
    def __init__(self, t: float, lo: float, hi: float):
        self.t, self.lo, self.hi = float(t), float(lo), float(hi)
        super().__init__(f"time {self.t!r} outside the covered range [{self.lo!r}, {self.hi!r}]")


class VelocityBoundViolation(SolverError):
    pass


class HistoryTooShort(DelayKitError):
    pass


class BracketNotFound(DelayKitError):
    pass


class ConfigError(DelayKitError):
    """Invalid run configuration (CLI exit code 1)."""


class UnsupportedModel(ConfigError):
    pass


class PreconditionFailed(DelayKitError):
    """Parameters or history violate the hypotheses of a boundedness result."""
