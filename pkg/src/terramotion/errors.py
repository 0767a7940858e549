"""Exception types shared across the toolkit."""


class TerraMotionError(Exception):
    """Base class for all toolkit errors."""


class DegenerateRotation(TerraMotionError):
    """6D rotation whose two columns are near-zero or parallel."""


class NotARotation(TerraMotionError):
    """Matrix failed the orthonormality / determinant +1 check."""


class OutOfBounds(TerraMotionError):
    """Query point outside a heightfield or grid extent."""


class InvalidParams(TerraMotionError):
    """Generator or config parameters outside documented ranges."""


class NoValidPatch(TerraMotionError):
    """Every patch in the bank was out of bounds for the motion."""


class SingularSystem(TerraMotionError):
    """RBF system is degenerate even after constraint merging."""


class EmptyMesh(TerraMotionError):
    """Triangle mesh with no faces where a surface is required."""


class DenoiserShapeMismatch(TerraMotionError):
    """Denoiser output shape disagrees with its input future block."""


class TooFewSamples(TerraMotionError):
    """Diversity needs at least two motion samples."""


class ConfigError(TerraMotionError):
    """Pipeline config file is malformed or carries unknown keys."""
