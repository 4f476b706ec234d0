"""Exception hierarchy shared by every engine module.

All engine failures derive from :class:`RahpError` so the CLI can map them to
a single machine-readable error line and exit code 1.
"""


class RahpError(Exception):
    """Base class for all engine errors."""


# --- embedding files -------------------------------------------------------

class MalformedHeader(RahpError):
    """File header/trailer is inconsistent with the body."""


class DimensionMismatch(RahpError):
    """Vector or matrix dimensions disagree."""


class ZeroVector(RahpError):
    """An all-zero embedding row was encountered."""


class DuplicateLabel(RahpError):
    """Two rows in one matrix carry the same label."""


class NonFiniteValue(RahpError):
    """A NaN or Inf entry was encountered."""


class IoFailure(RahpError):
    """Reading or writing a file failed at the OS level."""


# --- clustering ------------------------------------------------------------

class TooManyClusters(RahpError):
    """Requested more clusters than points."""


class NameCountMismatch(RahpError):
    """Number of supplied names differs from the number of clusters."""


# --- prompt hierarchy ------------------------------------------------------

class MissingEmbedding(RahpError):
    """A prompt string has no embedding row."""


# --- scoring ---------------------------------------------------------------

class EmptySlice(RahpError):
    """Selection was requested over zero region prompts."""


class UnknownPair(RahpError):
    """An indexed super-entity pair does not exist in the hierarchy."""


# --- losses ----------------------------------------------------------------

class DegenerateBox(RahpError):
    """Bounding box with non-positive width or height."""


class IndexOutOfRange(RahpError):
    """Class index outside the logit vector."""


# --- evaluation ------------------------------------------------------------

class ProtocolViolation(RahpError):
    """Inputs do not satisfy the evaluation protocol's preconditions."""


# --- mining ----------------------------------------------------------------

class EndpointUnreachable(RahpError):
    """The LLM endpoint could not be reached."""


class UnparseableResponse(RahpError):
    """The LLM response did not contain an extractable description list."""


class MissingFixture(RahpError):
    """Fixture mode was requested but no fixture covers the payload."""
