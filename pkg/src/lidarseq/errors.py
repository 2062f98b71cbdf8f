"""Exception types raised across the toolkit."""


class LidarSeqError(Exception):
    """Base class for all toolkit errors."""


class IoFailure(LidarSeqError):
    """A file could not be read or written."""


class TruncatedFile(LidarSeqError):
    """A binary file's length is not a multiple of its record size."""


class ParseError(LidarSeqError):
    """A text file (pose file, config) is malformed."""


class OrthonormalityViolation(LidarSeqError):
    """A pose's rotation block fails the orthonormality check."""


class LengthMismatch(LidarSeqError):
    """Per-point arrays that must align have different lengths."""


class MissingMask(LidarSeqError):
    """Non-smearing accumulation requested without a moving mask."""


class BudgetInfeasible(LidarSeqError):
    """Reference points alone occupy more voxels than the budget allows."""


class KeyMismatch(LidarSeqError):
    """A reference point is present in one prediction stream but not the other."""


class UnseenPoint(LidarSeqError):
    """A vote was requested for a point with no recorded observation."""


class NegativeRadius(LidarSeqError, ValueError):
    """A radius argument was negative."""


class NonPositiveCellSize(LidarSeqError, ValueError):
    """A voxel cell size was zero or negative."""


class UnknownClass(LidarSeqError):
    """A label id lies outside the configured class range."""


class EmptyReport(LidarSeqError):
    """No class has a defined IoU, so a mean cannot be formed."""
