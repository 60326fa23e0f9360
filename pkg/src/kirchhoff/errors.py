"""Exception types shared across the toolkit."""


class KirchhoffError(Exception):
    """Base class for all toolkit errors."""


class DomainError(KirchhoffError):
    """Degenerate or unsupported domain geometry."""


class ResolutionError(KirchhoffError):
    """Mesh resolution below the supported minimum."""


class ProvenanceError(KirchhoffError):
    """A field vector was used with operators from a different mesh."""


class SeedError(KirchhoffError):
    """Invalid (e.g. identically zero) seed for an iterative solver."""


class PositivityError(KirchhoffError):
    """A vector required to be strictly positive is not."""


class UnsupportedDomainError(KirchhoffError):
    """The requested operation needs a symmetry the domain lacks."""


class ConvergenceError(KirchhoffError):
    """Iteration cap reached before the tolerance was met.

    Carries the last residual and, where useful, the last iterate.
    """

    def __init__(self, message, residual=None, iterate=None):
        super().__init__(message)
        self.residual = residual
        self.iterate = iterate


class DivergenceError(KirchhoffError):
    """The damped Newton iteration kept increasing the residual."""


class SingularSystemError(KirchhoffError):
    """Singular base matrix or Sherman-Morrison denominator.

    Signals proximity to a fold or branch point to the continuation driver.
    """
