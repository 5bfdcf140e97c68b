"""Exception types shared across the package."""


class CurrentLabError(Exception):
    """Base class for all package errors."""


class TrivialWord(CurrentLabError):
    """A word reduced to the identity where a nontrivial class was required."""


class BudgetExceeded(CurrentLabError):
    """A configured enumeration or search cap was exceeded."""


class NotHyperbolic(CurrentLabError):
    """A matrix with |trace| <= 2 was passed where a hyperbolic element is needed."""


class Unstable(CurrentLabError):
    """An intersection count did not stabilise within the allowed search radius."""

    def __init__(self, message, counts=None):
        super().__init__(message)
        self.counts = counts or []


class NonFillingInput(CurrentLabError):
    """A current with a zero-intersection witness was passed where filling is required."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotMulticurve(CurrentLabError):
    """A current with a Liouville atom was passed where only curve atoms are allowed."""


class NonPositiveFunctional(CurrentLabError):
    """A functional is not positive on the sampled Jordan projections."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class AsymmetricPotential(CurrentLabError):
    """A symmetric potential was required but the supplied one is not symmetric."""


class Singular(CurrentLabError):
    """A singular matrix was passed where an invertible one is needed."""


class ValidationError(CurrentLabError):
    """Malformed input file or configuration."""
