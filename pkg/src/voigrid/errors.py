"""Exception types shared across the package."""


class VoigridError(Exception):
    """Base class for all errors raised by this package."""


class InvalidCoordinateError(VoigridError):
    """A grid coordinate lies outside the map."""


class InvalidParameterError(VoigridError):
    """A parameter value violates its documented range."""


class GenerationError(VoigridError):
    """Map generation failed to produce a usable world within the retry budget."""


class MapFormatError(VoigridError):
    """A map file could not be parsed; the message names the offending line."""


class InvalidPathError(VoigridError):
    """A cell sequence violates the adjacency rules of its agent kind."""


class PlanningFaultError(VoigridError):
    """A plan was requested but no path exists on the current belief."""


class ProtocolError(VoigridError):
    """A received message carries data that violates the wire contract."""


class UtilityUndefinedError(VoigridError):
    """A utility score was requested for a seeker with no unexplored waypoints."""


class AllocationError(VoigridError):
    """A bandwidth allocation problem violates its construction invariants."""


class ConfigurationError(VoigridError):
    """A simulation configuration is unusable (bad endpoints, infeasible world, ...)."""


class SamplingError(VoigridError):
    """Random endpoint sampling failed to find feasible positions."""


class NormalizationError(VoigridError):
    """A trade-off table lacks the reference frameworks needed for normalization."""
