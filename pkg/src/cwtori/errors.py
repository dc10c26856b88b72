"""Exception types shared across the package."""


class AccuracyError(RuntimeError):
    """A finite-difference result cannot meet the requested tolerance."""


class ConditioningError(RuntimeError):
    """A rank or kernel count has no clear spectral gap to stand on."""


class ShootingError(RuntimeError):
    """A closure root-find failed to converge."""


class ResolutionError(ValueError):
    """A sampling grid is too small for the requested band limit."""
