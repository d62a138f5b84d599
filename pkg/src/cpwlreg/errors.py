"""Exception hierarchy shared by all cpwlreg modules."""


class CpwlError(Exception):
    """Base class for every error raised by this package."""


# --- input / usage errors ---------------------------------------------------

class ParseError(CpwlError):
    """A CSV cell could not be parsed; message names the row/column."""


class MissingColumn(CpwlError):
    """The requested target column does not exist."""


class DimensionMismatch(CpwlError):
    """Operand shapes are inconsistent."""


class UnsupportedDimension(CpwlError):
    """The operation is only defined for specific dimensions (e.g. mesh export)."""


class InsufficientData(CpwlError):
    """Fewer than d+1 unique data points after deduplication."""


class FormatVersionMismatch(CpwlError):
    """Serialized model carries an unknown format version."""


class CorruptPayload(CpwlError):
    """Serialized model is truncated or fails its integrity check."""


# --- numerical / geometric errors -------------------------------------------

class DegenerateInput(CpwlError):
    """Points are affinely dependent or produce degenerate simplices."""


class DimensionTooHigh(CpwlError):
    """Ambient dimension exceeds the configured cap."""


class IllConditioned(CpwlError):
    """A matrix needed in closed form is numerically singular."""


class ConvergenceFailure(CpwlError):
    """An iterative method exhausted its budget before reaching tolerance."""


class PointOutsideHull(CpwlError):
    """A data point lies outside the grid hull beyond tolerance."""


class OutsideHull(CpwlError):
    """Evaluation requested outside the hull without the projection extension."""


class NegativeDiscriminant(CpwlError):
    """Squared facet volume came out below -tolerance."""


class SingularSystem(CpwlError):
    """The normal-equations system of the primal solver is singular."""


class EmptyOperator(CpwlError):
    """The regularization operator has no rows (single-simplex mesh)."""
