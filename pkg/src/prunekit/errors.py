"""Exception types shared across the package.

Data problems (bad files, shape mismatches, zero-norm rows) raise subclasses
of PruneKitError so the CLI can map them to a dedicated exit code.
"""


class PruneKitError(Exception):
    """Base class for all engine errors."""


class InvalidMatrixError(PruneKitError):
    """A token matrix violates its declared invariants."""


class DimMismatchError(PruneKitError):
    """Two matrices that must share an embedding width do not."""


class EmptyTextError(PruneKitError):
    """Alignment scoring needs at least one textual token."""


class ZeroNormTokenError(PruneKitError):
    """Cosine on a zero-norm embedding row is undefined."""


class DimTooSmallError(PruneKitError):
    """kNN MI estimation needs more paired samples than neighbors."""


class KeepOutOfRangeError(PruneKitError):
    """Requested keep count outside [1, available]."""


class TooFewTokensError(PruneKitError):
    """The pairwise objective needs at least two chosen tokens."""


class TooLargeError(PruneKitError):
    """Exact enumeration would exceed the configured subset cap."""


class TokenFileError(PruneKitError):
    """Base class for token-file parsing errors."""


class BadMagicError(TokenFileError):
    """File does not start with a recognized token-file signature."""


class UnsupportedVersionError(TokenFileError):
    """Token file declares a format version this reader does not know."""


class UnsupportedDtypeError(TokenFileError):
    """Token file declares a payload dtype this reader does not support."""


class TruncatedPayloadError(TokenFileError):
    """Payload shorter than the header-declared rows x dim."""


class NonFiniteEntryError(TokenFileError):
    """Payload contains NaN or Inf."""


class MalformedSelectionError(PruneKitError):
    """Selection file is structurally invalid."""


class DuplicateIndexError(MalformedSelectionError):
    """Selection contains a repeated index."""
