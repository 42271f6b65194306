"""Exception types shared across the package."""


class ShapeMismatchError(ValueError):
    """Array dimensions are incompatible with the operation."""


class UnsupportedFormatError(ValueError):
    """File extension or container format is not one we read or write."""


class CorruptImageError(ValueError):
    """File has a recognized format but undecodable content."""


class ZeroTargetError(ValueError):
    """Requested output size has a zero dimension."""


class UnknownClassDirectoryError(ValueError):
    """Dataset root contains a directory outside the closed label set."""


class EmptyClassError(ValueError):
    """A class directory contributes no image files."""


class InsufficientSamplesError(ValueError):
    """A class has fewer originals than the requested held-out count."""


class TargetBelowCurrentError(ValueError):
    """Augmentation target is smaller than the existing per-class count."""


class AugmentationExhaustedError(ValueError):
    """Not enough distinct (source, op) pairs to reach the target count."""


class IndivisibleHeadsError(ValueError):
    """Model width is not divisible by the head count."""


class InvalidDistributionError(ValueError):
    """Rows expected to be probability distributions do not sum to one."""


class UnknownLabelError(ValueError):
    """A label falls outside the closed class set."""
