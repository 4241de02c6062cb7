"""Exception types raised across the wrapping pipeline.

Grouped into perception, planning, and execution families so the CLI can
map failures onto distinct exit codes.
"""


class RopewrapError(Exception):
    """Base class for all pipeline errors."""


class PerceptionError(RopewrapError):
    """A perception stage could not produce a usable result."""


class PlanningError(RopewrapError):
    """A motion planning stage could not produce a feasible result."""


class ExecutionError(RopewrapError):
    """The simulated world rejected a commanded wrap."""


# -- imaging ---------------------------------------------------------------

class UnimodalDegenerate(PerceptionError):
    """Histogram has all its mass in a single bin; no threshold exists."""


class EmptyMask(PerceptionError):
    """A binary mask with no foreground pixels where some were required."""


class DegenerateGeometry(PerceptionError):
    """Fewer than three non-collinear points; no oriented rectangle exists."""


class DimensionMismatch(PerceptionError):
    """Two masks or images that must share dimensions do not."""


# -- rod estimation --------------------------------------------------------

class EmptyScene(PerceptionError):
    """Background subtraction removed every point."""


class NoClusters(PerceptionError):
    """Clustering produced only noise points."""


class IcpDiverged(PerceptionError):
    """Template registration finished with an unacceptably large residual."""


# -- rope tracing ----------------------------------------------------------

class SectionsNotFound(PerceptionError):
    """Fewer than two rope sections reachable from the bottom of the image."""


class RopeTooShort(PerceptionError):
    """The requested grasp offset exceeds the traced section length."""


# -- feedback --------------------------------------------------------------

class NoWrapDetected(PerceptionError):
    """No rope pixels visible in the wrap evaluation region."""


# -- planning --------------------------------------------------------------

class Unreachable(PlanningError):
    """A sampled wrap pose lies outside the reachable workspace."""

    def __init__(self, theta: float, message: str | None = None):
        self.theta = theta
        super().__init__(message or f"pose at theta={theta:.4f} rad is unreachable")


class NoFeasibleSafeDistance(PlanningError):
    """No safe distance in the allowed interval yields a reachable path."""


class RadiusUnderflow(PlanningError):
    """Radius shrinking dropped below half the estimated rod radius."""


# -- simulation ------------------------------------------------------------

class RopeExhausted(ExecutionError):
    """Not enough rope left to complete the commanded wrap."""


class TrajectoryIncomplete(ExecutionError):
    """A wrap trajectory is missing one of its required phases."""


# -- harness ---------------------------------------------------------------

class NonConvergence(RopewrapError):
    """The feedback loop did not meet both stop conditions within the wrap budget."""
