"""Exception types shared across the package."""


class NnlciError(Exception):
    """Base class for all package errors."""


class NonPhysicalStateError(NnlciError):
    """Density, pressure, or internal energy left the physical regime.

    Carries the location (step index, node index) where a solver blew up,
    when known.
    """

    def __init__(self, message, step=None, node=None):
        super().__init__(message)
        self.step = step
        self.node = node


class OutOfRangeError(NnlciError, IndexError):
    """An index or coordinate fell outside the valid grid range."""


class DegenerateFieldError(NnlciError):
    """A field has zero maximal wave speed; no CFL time step exists."""


class VacuumFormationError(NnlciError):
    """The Riemann pressure positivity condition failed (vacuum forms)."""


class LengthMismatchError(NnlciError, ValueError):
    """Vector lengths inconsistent with the declared layout."""


class GridMismatchError(NnlciError):
    """Two fields that must share a grid do not."""


class VariantMismatchError(NnlciError):
    """Model provenance disagrees with the snapshots offered for prediction."""


class DivergedLossError(NnlciError):
    """Training loss became non-finite."""


class CorruptModelFileError(NnlciError):
    """Model file failed magic/version/shape validation."""


class CorruptDatasetFileError(NnlciError):
    """Dataset file failed magic/version/shape validation."""


class ConfigError(NnlciError):
    """Invalid or inconsistent run configuration."""
