"""Exception hierarchy shared by every gaitlab module."""


class GaitLabError(Exception):
    """Base class for domain errors (CLI exit code 1)."""

    stage: str | None = None

    def __str__(self) -> str:
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {msg}"
        return msg


# recordings / references
class MissingChannel(GaitLabError):
    def __init__(self, channel: str):
        super().__init__(f"missing channel {channel!r}")
        self.channel = channel


class RaggedSeries(GaitLabError):
    pass


class NonFiniteSample(GaitLabError):
    def __init__(self, row: int, channel: str | None = None):
        where = f" in {channel!r}" if channel else ""
        super().__init__(f"non-finite sample at row {row}{where}")
        self.row = row
        self.channel = channel


class PhaseNotMonotone(GaitLabError):
    pass


class MissingJoint(GaitLabError):
    def __init__(self, joint: str):
        super().__init__(f"missing joint {joint!r}")
        self.joint = joint


class SchemaMismatch(GaitLabError):
    pass


# events / segmentation
class EmptySignal(GaitLabError):
    pass


class NoEventsFound(GaitLabError):
    pass


class NoCycles(GaitLabError):
    pass


class OutOfRange(GaitLabError):
    pass


class SegmentTooShort(GaitLabError):
    pass


# metrics
class NonPositiveDuration(GaitLabError):
    pass


class EmptySeries(GaitLabError):
    pass


class BothZero(GaitLabError):
    pass


class ZeroVariance(GaitLabError):
    pass


# simulation
class InvalidConfig(GaitLabError):
    def __init__(self, field: str, reason: str = "invalid value"):
        super().__init__(f"{field}: {reason}")
        self.field = field


class AlphaOutOfRange(GaitLabError):
    pass


class AlreadyAttached(GaitLabError):
    pass


class NumericalBlowup(GaitLabError):
    def __init__(self, step: int, env: int | None = None):
        where = f" (env {env})" if env is not None else ""
        super().__init__(f"non-finite state at physics step {step}{where}")
        self.step = step
        self.env = env


# reward
class MissingEndEffector(GaitLabError):
    def __init__(self, name: str):
        super().__init__(f"missing end-effector {name!r}")
        self.name = name


class LengthMismatch(GaitLabError):
    pass


# training
class NonFiniteLoss(GaitLabError):
    pass


class CheckpointMismatch(GaitLabError):
    pass


class AllEpisodesFell(GaitLabError):
    pass
