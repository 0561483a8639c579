"""Exception hierarchy shared by all brpatch modules."""


class BrPatchError(Exception):
    """Base class for every error raised by this package."""


class DomainError(BrPatchError, ValueError):
    """An argument violates an operation's precondition."""


class InfeasibleTransformError(DomainError):
    """The requested patch placement cannot fit inside the image."""


class TrainingDivergedError(BrPatchError):
    """Patch optimization produced a non-finite loss."""


class ConfigError(BrPatchError):
    """An experiment config file is malformed or references missing paths."""


class PatchIOError(BrPatchError):
    """Base class for patch container / image file errors."""


class CorruptHeaderError(PatchIOError):
    """Container magic or length prefix is damaged or truncated."""


class MetadataError(PatchIOError):
    """Container metadata failed to parse or has wrong keys/types."""


class PayloadLengthError(PatchIOError):
    """Pixel payload does not match the shape declared in the metadata."""


class PngFormatError(PatchIOError):
    """PNG is not 8-bit 3-channel, or cannot be decoded."""


class BackendError(BrPatchError):
    """A classifier backend failed or broke its contract."""


class CapabilityError(BackendError):
    """Gradient access requested from a black-box backend."""


class BackendUnderfitError(BackendError):
    """A freshly trained reference backend missed the accuracy floor."""


class DatasetError(BrPatchError):
    """Dataset file missing or malformed."""
