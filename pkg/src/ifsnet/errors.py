"""Exception hierarchy shared by all ifsnet modules.

Everything raised on purpose derives from IfsnetError so callers (and the
CLI) can separate expected failures from genuine bugs.
"""


class IfsnetError(Exception):
    """Base class for all errors raised by this package."""


class InvalidImageError(IfsnetError):
    """Input image is not a finite 2-D scalar grid."""


class ConstantImageError(IfsnetError):
    """Min-max normalization of an image whose max equals its min."""


class InvalidConfigError(IfsnetError):
    """A configuration object violates one of its parameter invariants."""


class ShapeMismatchError(IfsnetError):
    """Operands have incompatible shapes."""


class ConstraintViolationError(IfsnetError):
    """A mathematical constraint (e.g. mu + nu <= 1) is broken beyond tolerance."""


class InvalidBinsError(IfsnetError):
    """Histogram bin count below 1."""


class OddSpatialDimError(IfsnetError):
    """2x2 pooling applied to a tensor with odd height or width."""


class InvalidPError(IfsnetError):
    """Dropout probability outside [0, 1)."""


class NotScalarError(IfsnetError):
    """backward() called on a non-scalar tensor."""


class EmptyDatasetError(IfsnetError):
    """Dataset operation on an empty sample list."""


class InvalidLabelError(IfsnetError):
    """Label mask contains class ids outside 0..K-1."""


class InvalidSpecError(IfsnetError):
    """Phantom generation spec violates an invariant."""
