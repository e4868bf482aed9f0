"""Exception taxonomy shared across the package.

Every error raised on a contract violation derives from PseudostopError so
callers (and the CLI) can distinguish our failures from programming bugs.
"""


class PseudostopError(Exception):
    """Base class for all package-level errors."""


class ShapeError(PseudostopError):
    """Operands disagree in channel count or spatial extent."""


class DomainError(PseudostopError):
    """A scalar argument lies outside its legal range."""


class ZeroResidualError(PseudostopError):
    """A spectral statistic was requested for an identically zero residual."""


class SeedCollisionError(PseudostopError):
    """Two noise draws that must be independent were given the same seed."""


class ConfigError(PseudostopError):
    """A configuration object violates its own consistency rules."""


class ChannelError(PseudostopError):
    """An operation needs more (or differently arranged) channels."""


class ProvenanceError(PseudostopError):
    """A curve was requested against data the trajectory was not built from."""


class MetadataError(PseudostopError):
    """Required side information (divergence, noise level, ...) is missing."""


class CorruptBundleError(PseudostopError):
    """A serialized bundle fails checksum, length, or schema validation."""


class VersionError(PseudostopError):
    """A serialized bundle declares an unsupported format version."""


class UnsupportedOperatorError(PseudostopError):
    """A linear-operator kind outside the supported set was requested."""
