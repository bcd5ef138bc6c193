"""Exception hierarchy for the package."""


class TdoaError(Exception):
    """Base class for all library errors."""


class GeometryError(TdoaError):
    """Invalid array geometry (coplanar, coincident or ill-conditioned)."""


class InvalidPairError(TdoaError):
    """A microphone pair operation was given m == n."""


class InfeasibleDelayError(TdoaError):
    """The delay vector does not correspond to any real source position."""


class EqualityViolationError(InfeasibleDelayError):
    """The redundant-microphone consistency residual is too large."""


class DisambiguationError(TdoaError):
    """Neither closed-form candidate reproduces the input delays."""


class CorrelationError(TdoaError):
    """Frame or correlation-set construction failed."""


class SilentChannelError(CorrelationError):
    """A channel has zero energy."""


class LagRangeError(TdoaError):
    """A correlation was evaluated beyond its sampled lag range."""


class SolverError(TdoaError):
    """A localization solver failed to produce a usable estimate."""


class NoFeasibleRegionError(SolverError):
    """Branch-and-bound found no feasible region, even after the restart."""


class AllStartsFailedError(SolverError):
    """No multi-start run produced a feasible local minimum."""


class EmptyGridError(SolverError):
    """Grid construction filtered out every candidate point."""


class SimulationError(TdoaError):
    """Room simulation was asked for an impossible configuration."""


class ConfigError(TdoaError):
    """A user-supplied configuration file or value is invalid."""
