"""Exception types raised by geoatt."""


class GeoattError(ValueError):
    """Base class for all geoatt errors."""


class NotOrthogonal(GeoattError):
    pass


class NegativeDeterminant(GeoattError):
    pass


class DimensionMismatch(GeoattError):
    pass


class NoConvergence(GeoattError):
    """Eigenvalue iteration hit its cap."""


class StepRejected(GeoattError):
    """An integration step produced a non-finite value."""


class SingularY(GeoattError):
    pass


class DomainError(GeoattError):
    """Initial condition lies in the set where the closed forms are undefined."""


class RealityError(GeoattError):
    """A closed form that must be real came out with an imaginary residue."""


class SingularSystem(GeoattError):
    pass


class NotAnEquilibrium(GeoattError):
    pass


class InconsistentParameters(GeoattError):
    pass


class RankMismatch(GeoattError):
    pass
