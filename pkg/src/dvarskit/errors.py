"""Exception hierarchy.

Every error raised on purpose by this package derives from `DvarsError`, so
the command line can turn them into a one-line message and exit status 1.
"""


class DvarsError(Exception):
    """Base class for all package errors."""


class InvalidInputError(DvarsError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(InvalidInputError):
    """Input is well formed but a statistic is undefined for it (e.g. constant series)."""


class NiftiError(DvarsError):
    """A NIfTI-1 file could not be read or written."""


class GeometryMismatchError(InvalidInputError):
    """Two objects that must share a voxel grid do not."""


class EmptyMaskError(InvalidInputError):
    """A mask would include no voxels."""
