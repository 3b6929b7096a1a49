"""Exception and warning types shared across the package."""


class DyceError(Exception):
    """Base class for all errors raised by this package."""


class MissingFile(DyceError):
    """A manifest or referenced data file does not exist."""


class SchemaViolation(DyceError):
    """A manifest or data file is structurally malformed (field absent or wrongly typed)."""


class InvariantViolation(DyceError):
    """Loaded data violates a declared invariant; the message names the offending record."""


class InvalidShape(DyceError):
    """Synthesis arguments are inconsistent (e.g. candidate list length differs from position count)."""


class ShapeMismatch(DyceError):
    """A configuration does not match the trace it is applied to."""


class InvalidLambda(DyceError):
    """The accuracy/complexity weight is outside [0, 1]."""


class PositionOutOfRange(DyceError):
    """A searchable position index is outside 1..N-1."""


class CandidateOutOfRange(DyceError):
    """An exit candidate index is not available at the requested position."""


class EmptyGrid(DyceError):
    """A threshold or lambda grid contains no values."""


class SampleOutOfRange(DyceError):
    """A sample id is outside 0..M-1."""


class Infeasible(DyceError):
    """No stored configuration satisfies the requested target; names the nearest miss."""


class RoundLimitReached(UserWarning):
    """Iterative search stopped at the round limit before reaching a local optimum."""
