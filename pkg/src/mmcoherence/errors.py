"""Shared exception types for the coherence engine."""


class CoherenceError(Exception):
    """Base class for all engine errors."""


class BundleError(CoherenceError):
    """A bundle record or file cannot be interpreted."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class SchemaError(BundleError):
    """Missing or ill-typed field, bad header, or violated record invariant."""


class DimensionMismatch(BundleError):
    """An embedding's dimension differs from the bundle's shared dimension."""


class DanglingReference(BundleError):
    """A relationship triplet references an object id absent from its event."""

    def __init__(self, message: str, ref_id: str | None = None, line: int | None = None):
        super().__init__(message, line=line)
        self.ref_id = ref_id


class MissingInput(CoherenceError):
    """A metric's required inputs are absent from the event."""


class InsufficientData(CoherenceError):
    """Too few events or values to carry out the requested analysis."""


class DegenerateTarget(CoherenceError):
    """The optimization target is constant, so rank correlation is undefined."""


class NonFiniteInput(CoherenceError, ValueError):
    """Statistic input contains NaN or infinity."""


class ConstantInput(CoherenceError, ValueError):
    """Correlation input is constant, so the coefficient is undefined."""


class LengthMismatch(CoherenceError, ValueError):
    """Paired samples differ in length."""


class AllTied(CoherenceError, ValueError):
    """Every pooled value is identical; the tie correction divisor is zero."""


class NoDonorObjects(CoherenceError, ValueError):
    """Donor event has no object annotations to draw from."""


class NoDonorRegions(CoherenceError, ValueError):
    """Donor event has no region descriptions to draw from."""
