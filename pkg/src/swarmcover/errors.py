"""Exception types shared across the package."""


class SwarmCoverError(Exception):
    """Base class for all package-specific errors."""


class DegenerateDirectionSum(SwarmCoverError):
    """The per-drone camera directions sum to (nearly) zero, so the
    average direction is undefined."""


class TargetTooClose(SwarmCoverError):
    """Drone-to-target distance fell below the configured guard, making
    the line-of-sight unit vector ill-conditioned."""


class GridTooLarge(SwarmCoverError):
    """The requested grid would exceed the configured cell-count cap."""


class InfeasibleRow(SwarmCoverError):
    """A constraint row with zero normal demands a positive right-hand
    side; no input can satisfy it."""


class ScenarioError(SwarmCoverError):
    """A scenario document is malformed or contains unknown keys."""


class ProtocolError(SwarmCoverError):
    """A wire message violates the stream protocol."""
