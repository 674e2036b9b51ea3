"""Exception types raised by the covapix library.

Every error the library raises deliberately derives from CovapixError, so
callers (the CLI included) can catch one base class and map it to a
diagnostic. Anything else escaping the library is a bug.
"""

from __future__ import annotations


class CovapixError(Exception):
    """Base class for all covapix errors."""


# -- matrix numerics ---------------------------------------------------------

class DimensionMismatch(CovapixError):
    """Operands have incompatible dimensions."""


class NotPositiveSemidefinite(CovapixError):
    """Matrix is indefinite beyond tolerance; no factorization exists."""


# -- fusion ------------------------------------------------------------------

class DegenerateInput(CovapixError):
    """Both inputs carry zero uncertainty mass; the operator is undefined."""


class EmptyInput(CovapixError):
    """An operation that needs at least one element received none."""


# -- segmentation ------------------------------------------------------------

class ZeroDimension(CovapixError):
    """A width, height, or tile size below one pixel."""


class EmptyImage(CovapixError):
    """Image with no pixels."""


class KTooLarge(CovapixError):
    """More regions requested than there are pixels."""


# -- covapixel extraction ----------------------------------------------------

class FeatureSpaceMismatch(CovapixError):
    """Covapixels from different feature spaces cannot be combined."""


class ColorSpaceMismatch(CovapixError):
    """Feature space expects a different image color space."""


class MissingRegion(CovapixError):
    """A label id has no covapixel (or an id is absent from a document)."""


# -- rendering ---------------------------------------------------------------

class WrongColorSpace(CovapixError):
    """Operation requires an image in a different color space."""


class NoColorFeatures(CovapixError):
    """Feature space carries no color channels to paint with."""


class NoSpatialFeatures(CovapixError):
    """Feature space carries no spatial coordinates to place geometry."""


# -- file formats ------------------------------------------------------------

class MalformedHeader(CovapixError):
    """File header does not parse."""


class UnexpectedEof(CovapixError):
    """File ends before the declared payload is complete."""


class UnsupportedMaxval(CovapixError):
    """PPM maxval other than 255."""
