"""Exception types raised across the package."""


class OAISError(Exception):
    """Base class for all errors raised by :mod:`oais`."""


class TargetDomainError(OAISError, ValueError):
    """A target log-density returned a non-finite value at an evaluated point."""


class MissingNormalizerError(OAISError, ValueError):
    """An operation needs the normalized target but ``log_z`` is unknown."""


class DegenerateWeightsError(OAISError, FloatingPointError):
    """All importance weights underflowed, or their moments overflowed."""


class ParticleReuseError(OAISError, ValueError):
    """Particles drawn at one parameter were offered for a gradient at another."""


class PreconditionError(OAISError, ValueError):
    """A documented precondition of an adaptation scheme is violated."""


class ConfigError(OAISError, ValueError):
    """An experiment configuration is malformed or refers to unknown specs."""
