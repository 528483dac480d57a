"""Exception types raised across the package."""


class ShapeMismatch(ValueError):
    """Grid values or coefficient arrays do not match the expected layout."""


class UnsupportedDimension(ValueError):
    """Spherical transforms are only implemented for n = 2."""


class GraphError(RuntimeError):
    """A surface is not (or stopped being) a valid radial graph."""


class FlowError(RuntimeError):
    """Time integration stopped early; carries the last valid state."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class TrajectoryGap(ValueError):
    """A requested time is not covered by a stored trajectory."""


class FitError(RuntimeError):
    """A least-squares fit could not be performed or is untrustworthy."""


class SweepError(ValueError):
    """A query point is never swept by the front, or is swept non-monotonically."""
