"""Exception types shared across the package."""


class VvotError(Exception):
    """Base class for all package-specific errors."""


class GraphValidationError(VvotError):
    """Raised by graph validation; ``reason`` is one of
    'asymmetric', 'negative_weight', 'disconnected'."""

    def __init__(self, reason: str, message: str = ""):
        self.reason = reason
        super().__init__(message or reason)


class DomainError(VvotError):
    """Input outside the mathematical domain of an operation."""


class RankDeficientError(VvotError):
    """Weighted Laplacian has more than one (near-)zero eigenvalue."""


class NotInRangeError(VvotError):
    """Right-hand side not orthogonal to the constant vector."""


class DivergentIntegralError(VvotError):
    """Improper endpoint integral failed to converge."""


class BoundaryAnchorsError(VvotError):
    """Regularization anchors must be strictly interior simplex points."""


class MassMismatchError(VvotError):
    """Total masses of the two measures disagree."""


class ThetaNotVanishingError(VvotError):
    """Operation requires an interpolation with theta(s, 0) = 0."""


class BoundaryAtomError(VvotError):
    """Lifted atom too close to the simplex boundary."""


class SingularLaplacianError(VvotError):
    """Laplacian solve failed for a lifted atom."""


class ReferenceMismatchError(VvotError):
    """Embeddings built against different reference measures."""


class DivergedError(VvotError):
    """Time stepper failed after repeated step-size reductions."""
