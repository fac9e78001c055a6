"""Exception types shared across the package."""


class AsymTensorError(Exception):
    """Base class for all package errors."""


class NotTraceless(AsymTensorError):
    """Input tensor has a trace larger than the allowed tolerance."""


class ZeroTensor(AsymTensorError):
    """Operation undefined for the zero tensor (e.g. isotropicity)."""


class NotComplexDomain(AsymTensorError):
    """Complex-domain structure requested for a tensor with real spectrum."""


class IllConditioned(AsymTensorError):
    """Eigenvector residual exceeded the conditioning bound."""


class DegenerateTet(AsymTensorError):
    """Tetrahedron signed volume below the degeneracy threshold."""


class ParseError(AsymTensorError):
    """Malformed input file; message carries line/record context."""


class UnsupportedFormat(AsymTensorError):
    """File extension or header not recognized by readers/writers."""


class LoopChainFailure(AsymTensorError):
    """Boundary-curve endpoints could not be chained into closed loops."""


class CurveOffSurface(AsymTensorError):
    """Splitting curve is farther from the surface than the tolerance."""


class InvalidSpec(AsymTensorError):
    """Feature specification with an impossible parameter combination."""


class SeedOutsideDomain(AsymTensorError):
    """Hyperstreamline seed point is not inside any tetrahedron."""


class EigenmodeUnavailable(AsymTensorError):
    """Requested eigenvector field does not exist at the seed point."""
