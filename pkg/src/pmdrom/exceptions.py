"""Exception hierarchy.

Three branches drive the CLI exit codes: configuration problems exit with 2,
data problems with 3, numerical failures with 4.
"""


class PmdError(Exception):
    """Base class for all package errors."""


class ConfigError(PmdError):
    """Invalid configuration: bad values, unknown keys, empty grids."""


class DataError(PmdError):
    """Input data violates a contract (shapes, ordering, degeneracy, files)."""


class NumericalError(PmdError):
    """A numerical procedure failed (singular system, bad spectrum, NaNs)."""


# --- data errors -------------------------------------------------------------

class MismatchedShapeError(DataError):
    """Trajectories disagree in spatial or temporal extent."""


class DuplicateParameterError(DataError):
    """Two trajectories share the same parameter value."""


class LengthMismatchError(DataError):
    """Vector length disagrees with stored statistics."""


class ShapeMismatchError(DataError):
    """Matrix shape disagrees with a fitted object."""


class UnsortedParametersError(DataError):
    """Parameter (or sample-location) sequence is not strictly ascending."""


class ZeroMatrixError(DataError):
    """An all-zero matrix where a nontrivial factorization is required."""


class RankTooLargeError(DataError):
    """Requested rank or embedding dimension exceeds what the data supports."""


class DegeneratePointsError(DataError):
    """All points coincide; no neighborhood structure exists."""


class DisconnectedGraphError(DataError):
    """Graph has unreachable node pairs; geodesics are undefined."""


class AllZeroDistancesError(DataError):
    """Every off-diagonal distance is zero; no bandwidth can be selected."""


class ZeroRowError(DataError):
    """A row of the affinity matrix sums to zero and cannot be normalized."""


class TooFewPointsError(DataError):
    """Not enough distinct sample locations to build a cubic spline basis."""


class OutOfDomainError(DataError):
    """Evaluation point lies outside the fitted domain and extrapolation is off."""


class InsufficientSamplesError(DataError):
    """Too few parameter samples to train the pipeline."""


class DegenerateEmbeddingError(DataError):
    """Embedding columns are (numerically) constant; dynamics are undefined."""


class BadGridError(DataError):
    """Synthetic-data grid sizes are too small."""


class SnapshotFormatError(DataError):
    """Base for snapshot-file format violations."""


class BadMagicError(SnapshotFormatError):
    """File does not start with the expected magic bytes."""


class BadVersionError(SnapshotFormatError):
    """Unsupported format version."""


class TruncatedFileError(SnapshotFormatError):
    """File ends before the declared payload does."""


class BadHeaderError(SnapshotFormatError):
    """Header fields are mutually inconsistent."""


class SnapshotIOError(DataError):
    """Operating-system level read/write failure."""


# --- numerical errors --------------------------------------------------------

class SingularSystemError(NumericalError):
    """A linear solve failed or returned garbage.

    Carries the condition number (when available) for diagnostics.
    """

    def __init__(self, message: str, condition_number: float | None = None):
        if condition_number is not None:
            message = f"{message} (condition number {condition_number:.3e})"
        super().__init__(message)
        self.condition_number = condition_number


class EigSolveFailureError(NumericalError):
    """Eigendecomposition failed or produced an unusable spectrum."""


class HarmonicCutoffError(NumericalError):
    """Requested harmonic has an eigenvalue at or below the stability floor."""


class NaNSlopeError(NumericalError):
    """Log-log slope is undefined (zero or non-finite errors)."""


# --- configuration errors ----------------------------------------------------

class EmptyGridError(ConfigError):
    """A hyperparameter grid is empty."""


class FoldTooSmallError(ConfigError):
    """More cross-validation folds than samples."""
