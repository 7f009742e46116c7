"""Exception types raised across the package."""


class QSEError(ValueError):
    """Base class for numeric and validation failures."""


class NotHermitianError(QSEError):
    pass


class NotPSDError(QSEError):
    pass


class InvalidStateError(QSEError):
    pass


class DegenerateSteeringError(QSEError):
    """Raised when a POVM element has zero probability on the steering party."""


class FitError(QSEError):
    pass
