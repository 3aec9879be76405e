"""Exception types shared across the package."""


class HHTError(Exception):
    """Base class for package errors."""


class DegenerateInputError(HHTError, ValueError):
    """Input too short or otherwise degenerate for the requested operation."""


class TooFewExtremaError(HHTError):
    """Signal has too few extrema to build envelopes; it is a residue."""


class NoModeFoundError(HHTError):
    """No IMF carries a significant low-frequency dominant component."""


class NoAdmissibleWindowError(HHTError):
    """Every candidate mode-shape window was rejected."""


class InfeasibleTargetError(HHTError, ValueError):
    """Calibration targets imply a singular or non-positive stiffness."""


class NotPositiveDefiniteError(HHTError, ValueError):
    """Mass or stiffness matrix is not positive definite."""


class InstabilityError(HHTError, RuntimeError):
    """Time integration diverged."""


class RankDeficientError(HHTError, ValueError):
    """Least-squares feature matrix is singular and no ridge was given."""
