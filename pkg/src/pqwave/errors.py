"""Exception and warning types raised across the package."""


class PqwaveError(Exception):
    """Base class for all package errors."""


class ConvergenceFailure(PqwaveError):
    """The equiripple exchange did not converge within its iteration budget."""


class FactorizationFailure(PqwaveError):
    """Spectral factor does not reproduce the product filter to tolerance."""


class PrecisionFailure(PqwaveError):
    """Root finding lost too much precision (orthogonality residual too large)."""


class NoPeak(PqwaveError):
    """No spectral line rises above the noise floor inside the search range."""


class WindowTooShort(PqwaveError):
    """The deepest upsampled filter does not fit inside the analysis window."""


class BandAssignmentAmbiguous(PqwaveError):
    """A leaf response has more than one region above half gain."""


class TargetOnBandEdge(PqwaveError):
    """Requested frequency sits inside a transition band between two leaves."""


class ExtractionLeakage(UserWarning):
    """An extracted line left more than 5% of its amplitude in the residual."""
