"""Exception types shared across the package."""


class CloudSepError(Exception):
    """Base class for all errors raised by this package."""


class EmptyMeasure(CloudSepError):
    """The measure has no mass (no shapes, no atoms, or zero total weight)."""


class QuadratureFailure(CloudSepError):
    """A discretization rule could not reach the requested exactness."""


class NotAMomentMatrix(CloudSepError):
    """The supplied moment data is not positive semidefinite within tolerance."""


class RankDeficient(CloudSepError):
    """The moment data only supports a basis of smaller rank.

    Attributes
    ----------
    rank : int
        Largest usable basis size.
    """

    def __init__(self, rank, message=None):
        self.rank = int(rank)
        super().__init__(message or f"moment data has numerical rank {rank}")


class DegreeOutOfRange(CloudSepError):
    """A degree/size request exceeds what the available data supports."""


class InfiniteChristoffel(CloudSepError):
    """The Christoffel function is infinite (evaluation outside the basis span)."""


class NoConvergence(CloudSepError):
    """A partial-sum sequence shows no sign of settling.

    Attributes
    ----------
    k, l : int
        Exponent pair of the offending trace, when known.
    """

    def __init__(self, message, k=None, l=None):
        self.k = k
        self.l = l
        super().__init__(message)


class CentroidUndefined(CloudSepError):
    """The recovered area is too small for a meaningful centroid."""


class FitIllConditioned(CloudSepError):
    """The rational fit's linear system is numerically rank deficient."""


class OutsideDomainRequired(CloudSepError):
    """Series evaluation requested inside the region where it diverges."""
