"""Exception hierarchy shared across the package."""


class FglmError(Exception):
    """Base class for all package-specific errors."""


class AlignmentError(FglmError):
    """Sequences that must share a grid have mismatched lengths."""


class DataError(FglmError):
    """Invalid or unparsable input data (CLI exit code 2)."""


class ConfigError(FglmError):
    """Inconsistent or invalid configuration (CLI exit code 3)."""


class ResolutionError(ConfigError):
    """Grid too coarse for the requested construction."""


class NumericError(FglmError):
    """Non-finite intermediate encountered during evaluation."""


class RankDeficiencyError(FglmError):
    """Weighted normal equations are singular or nearly so."""


class SeparationError(FglmError):
    """Diverging coefficients indicating complete separation."""


class ConvergenceError(FglmError):
    """Iteration failed to converge (CLI exit code 4)."""


class SmoothingError(FglmError):
    """Kernel smoother could not produce a fit even after bandwidth inflation."""


class DegenerateLinkError(FglmError):
    """Estimated link collapsed to a constant during alternation."""


class ConditioningError(FglmError):
    """A matrix required for inference is too ill-conditioned to invert."""


class SelectionError(FglmError):
    """No candidate model order could be fit."""
